//! Graph filter-bank layers, pooling, fusion and the dense head, written
//! against a [`Tape`] so every piece is differentiable.
//!
//! Node features for a batch of `n` graphs are stacked row-wise
//! (`(n * nodes) x d`), and the propagation operator is the block-diagonal
//! `I_n ⊗ (Ã ⊙ M)` built by [`propagation_matrix`].

use crate::error::{Error, Result};
use crate::model::config::Activation;
use crate::tensor::{Tape, Tensor, Var};

/// Filter-bank hyperparameters for one block.
#[derive(Clone, Debug)]
pub struct BlockParams<'a> {
    pub phi: f64,
    pub phi_i: &'a [f64],
    pub a: f64,
    pub activation: Activation,
}

/// `I_n ⊗ S` for a per-graph operator `S`.
pub fn propagation_matrix(per_graph: &Tensor, n_graphs: usize) -> Result<Tensor> {
    let (k, k2) = per_graph.dims2()?;
    if k != k2 {
        return Err(Error::InvalidShape {
            shape: per_graph.shape().to_vec(),
            reason: "propagation operator must be square".into(),
        });
    }
    let size = k * n_graphs;
    let mut out = Tensor::zeros(&[size, size]);
    for g in 0..n_graphs {
        for i in 0..k {
            for j in 0..k {
                out.set(g * k + i, g * k + j, per_graph.get(i, j));
            }
        }
    }
    Ok(out)
}

fn activate(tape: &mut Tape, x: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Identity => x,
    }
}

fn check_filter_weights(thetas: &[Var], weights: &[f64]) -> Result<()> {
    if thetas.is_empty() || thetas.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} filters but {} weights",
            thetas.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("filter weights must sum to 1, got {total}")));
    }
    Ok(())
}

fn low_from_propagated(
    tape: &mut Tape,
    propagated: Var,
    thetas: &[Var],
    weights: &[f64],
    act: Activation,
) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for (&theta, &w) in thetas.iter().zip(weights) {
        let branch = tape.matmul(propagated, theta)?;
        let branch = activate(tape, branch, act);
        let branch = tape.scale(branch, w);
        acc = Some(match acc {
            Some(prev) => tape.add(prev, branch)?,
            None => branch,
        });
    }
    Ok(acc.expect("at least one filter"))
}

fn high_from_propagated(tape: &mut Tape, propagated: Var, h: Var, theta: Var, a: f64) -> Result<Var> {
    let neigh = tape.matmul(propagated, theta)?;
    let own = tape.matmul(h, theta)?;
    let neigh = tape.scale(neigh, a);
    let own = tape.scale(own, 1.0 - a);
    tape.sub(neigh, own)
}

/// `Σᵢ φᵢ σ((Ã ⊙ M) h Θᵢ)`; `kernel` is the (block-diagonal) `Ã ⊙ M`.
pub fn lowpass_layer(
    tape: &mut Tape,
    h: Var,
    kernel: Var,
    thetas: &[Var],
    weights: &[f64],
    act: Activation,
) -> Result<Var> {
    check_filter_weights(thetas, weights)?;
    let propagated = tape.matmul(kernel, h)?;
    low_from_propagated(tape, propagated, thetas, weights, act)
}

/// `a (Ã ⊙ M) h Θ - (1 - a) h Θ`. No activation.
pub fn highpass_layer(tape: &mut Tape, h: Var, kernel: Var, theta: Var, a: f64) -> Result<Var> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Config(format!("a = {a} must lie in [0, 1]")));
    }
    let propagated = tape.matmul(kernel, h)?;
    high_from_propagated(tape, propagated, h, theta, a)
}

/// `φ h_low + (1 - φ) h_high`.
pub fn mffbm_block(
    tape: &mut Tape,
    h: Var,
    kernel: Var,
    low_thetas: &[Var],
    high_theta: Var,
    params: &BlockParams<'_>,
) -> Result<Var> {
    check_filter_weights(low_thetas, params.phi_i)?;
    if !(0.0..=1.0).contains(&params.phi) || !(0.0..=1.0).contains(&params.a) {
        return Err(Error::Config("phi and a must lie in [0, 1]".into()));
    }
    let propagated = tape.matmul(kernel, h)?;
    let low = low_from_propagated(tape, propagated, low_thetas, params.phi_i, params.activation)?;
    let high = high_from_propagated(tape, propagated, h, high_theta, params.a)?;
    let low = tape.scale(low, params.phi);
    let high = tape.scale(high, 1.0 - params.phi);
    tape.add(low, high)
}

/// Channel-wise mean over the `n_nodes` rows of each stacked graph.
pub fn global_average_pool(tape: &mut Tape, h: Var, n_nodes: usize) -> Result<Var> {
    tape.group_mean_rows(h, n_nodes)
}

/// `graph ⊕ U_1 ⊕ … ⊕ U_m` in argument order; the graph part goes first when
/// present.
pub fn fuse(tape: &mut Tape, graph: Option<Var>, embeddings: &[Var]) -> Result<Var> {
    let parts: Vec<Var> = graph.into_iter().chain(embeddings.iter().copied()).collect();
    tape.concat_cols(&parts)
}

pub fn dense(tape: &mut Tape, x: Var, w: Var, b: Var, relu: bool) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    let y = tape.add_row_bias(y, b)?;
    Ok(if relu { tape.relu(y) } else { y })
}

/// Dense stack with ReLU between layers; the last layer emits logits.
pub fn head_logits(tape: &mut Tape, z: Var, layers: &[(Var, Var)]) -> Result<Var> {
    let mut x = z;
    for (i, &(w, b)) in layers.iter().enumerate() {
        x = dense(tape, x, w, b, i + 1 < layers.len())?;
    }
    Ok(x)
}

/// Dense head followed by a row softmax.
pub fn classify(tape: &mut Tape, z: Var, layers: &[(Var, Var)]) -> Result<Var> {
    let logits = head_logits(tape, z, layers)?;
    tape.softmax(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{normalize_adjacency, ModalityGraph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn single_node_lowpass_is_relu() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h0 = rand_tensor(&mut rng, 1, 4);
        let mut tape = Tape::new();
        let h = tape.constant(h0.clone());
        let k = tape.constant(normalize_adjacency(&ModalityGraph::complete(1)));
        let theta = tape.constant(Tensor::identity(4));
        let out = lowpass_layer(&mut tape, h, k, &[theta], &[1.0], Activation::Relu).unwrap();
        assert_eq!(tape.value(out), &h0.map(|v| v.max(0.0)));
    }

    #[test]
    fn zero_input_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::zeros(&[3, 4]));
        let k = tape.constant(normalize_adjacency(&ModalityGraph::complete(3)));
        let t1 = tape.constant(rand_tensor(&mut rng, 4, 4));
        let t2 = tape.constant(rand_tensor(&mut rng, 4, 4));
        let low = lowpass_layer(&mut tape, h, k, &[t1, t2], &[0.3, 0.7], Activation::Relu).unwrap();
        let high = highpass_layer(&mut tape, h, k, t1, 0.4).unwrap();
        assert_eq!(tape.value(low).max_abs(), 0.0);
        assert_eq!(tape.value(high).max_abs(), 0.0);
    }

    #[test]
    fn complete_graph_lowpass_averages_one_hot_rows() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::identity(3));
        let k = tape.constant(normalize_adjacency(&ModalityGraph::complete(3)));
        let theta = tape.constant(Tensor::identity(3));
        let out = lowpass_layer(&mut tape, h, k, &[theta], &[1.0], Activation::Relu).unwrap();
        // (J/3) I = J/3
        assert!(tape.value(out).data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn highpass_cancels_constant_features_at_half() {
        let mut tape = Tape::new();
        let c = Tensor::matrix(3, 2, vec![0.7, -1.2, 0.7, -1.2, 0.7, -1.2]).unwrap();
        let h = tape.constant(c);
        let k = tape.constant(normalize_adjacency(&ModalityGraph::complete(3)));
        let theta = tape.constant(Tensor::identity(2));
        let out = highpass_layer(&mut tape, h, k, theta, 0.5).unwrap();
        assert!(tape.value(out).max_abs() < 1e-15);
    }

    #[test]
    fn single_node_highpass_scales_by_two_a_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h0 = rand_tensor(&mut rng, 1, 5);
        for a in [0.0, 0.25, 0.9] {
            let mut tape = Tape::new();
            let h = tape.constant(h0.clone());
            let k = tape.constant(normalize_adjacency(&ModalityGraph::complete(1)));
            let theta = tape.constant(Tensor::identity(5));
            let out = highpass_layer(&mut tape, h, k, theta, a).unwrap();
            assert!(tape.value(out).max_abs_diff(&h0.scale(2.0 * a - 1.0)) < 1e-15);
        }
    }

    fn block_and_branches(phi: f64, seed: u64) -> (Tensor, Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let h = tape.constant(rand_tensor(&mut rng, 6, 4));
        let s = propagation_matrix(&normalize_adjacency(&ModalityGraph::complete(3)), 2).unwrap();
        let k = tape.constant(s);
        let t1 = tape.constant(rand_tensor(&mut rng, 4, 5));
        let t2 = tape.constant(rand_tensor(&mut rng, 4, 5));
        let th = tape.constant(rand_tensor(&mut rng, 4, 5));
        let w = [0.4, 0.6];
        let low = lowpass_layer(&mut tape, h, k, &[t1, t2], &w, Activation::Relu).unwrap();
        let high = highpass_layer(&mut tape, h, k, th, 0.3).unwrap();
        let params = BlockParams {
            phi,
            phi_i: &w,
            a: 0.3,
            activation: Activation::Relu,
        };
        let out = mffbm_block(&mut tape, h, k, &[t1, t2], th, &params).unwrap();
        (tape.value(low).clone(), tape.value(high).clone(), tape.value(out).clone())
    }

    #[test]
    fn block_mixing_boundaries() {
        let (low, _, out) = block_and_branches(1.0, 4);
        assert!(out.max_abs_diff(&low) < 1e-15);
        let (_, high, out) = block_and_branches(0.0, 4);
        assert!(out.max_abs_diff(&high) < 1e-15);
        let (low, high, out) = block_and_branches(0.5, 4);
        let avg = low.add(&high).unwrap().scale(0.5);
        assert!(out.max_abs_diff(&avg) < 1e-12);
    }

    #[test]
    fn block_output_between_branches() {
        for seed in 0..20 {
            let phi = (seed as f64) / 19.0;
            let (low, high, out) = block_and_branches(phi, 100 + seed);
            for ((&l, &h), &o) in low.data().iter().zip(high.data()).zip(out.data()) {
                assert!(o >= l.min(h) - 1e-12 && o <= l.max(h) + 1e-12);
            }
        }
    }

    #[test]
    fn linear_two_block_trunk_is_square_of_block_kernel() {
        use crate::spectral::block_kernel;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = ModalityGraph::erdos_renyi(6, 0.5, 2);
        let a_norm = normalize_adjacency(&g);
        for (phi, a) in [(0.0, 0.5), (0.3, 0.7), (0.5, 0.5), (1.0, 0.2)] {
            let h0 = rand_tensor(&mut rng, 6, 4);
            let t1 = rand_tensor(&mut rng, 4, 5);
            let t2 = rand_tensor(&mut rng, 5, 3);
            let mut tape = Tape::new();
            let h = tape.constant(h0.clone());
            let k = tape.constant(a_norm.clone());
            let (v1, v2) = (tape.constant(t1.clone()), tape.constant(t2.clone()));
            let params = BlockParams {
                phi,
                phi_i: &[1.0],
                a,
                activation: Activation::Identity,
            };
            let h1 = mffbm_block(&mut tape, h, k, &[v1], v1, &params).unwrap();
            let h2 = mffbm_block(&mut tape, h1, k, &[v2], v2, &params).unwrap();
            let b = block_kernel(&a_norm, phi, a).unwrap();
            let want = b.matmul(&b).unwrap().matmul(&h0).unwrap().matmul(&t1).unwrap().matmul(&t2).unwrap();
            assert!(tape.value(h2).max_abs_diff(&want) < 1e-10);
        }
    }

    #[test]
    fn pooled_trunk_is_invariant_to_node_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = ModalityGraph::complete(3);
        let mask = Tensor::matrix(3, 3, vec![1.0, 0.4, 0.9, 0.4, 1.0, 0.2, 0.9, 0.2, 1.0]).unwrap();
        let s = g.clone().with_mask(mask.clone()).unwrap().masked_adjacency();
        let perm = [2usize, 0, 1];
        let mut p = Tensor::zeros(&[3, 3]);
        for (i, &j) in perm.iter().enumerate() {
            p.set(i, j, 1.0);
        }
        let pt = p.transpose().unwrap();
        let s_perm = p.matmul(&s).unwrap().matmul(&pt).unwrap();
        let h0 = rand_tensor(&mut rng, 3, 4);
        let thetas: Vec<Tensor> = (0..3).map(|_| rand_tensor(&mut rng, 4, 4)).collect();
        let run = |s: &Tensor, h: &Tensor| {
            let mut tape = Tape::new();
            let mut x = tape.constant(h.clone());
            let k = tape.constant(s.clone());
            let t: Vec<Var> = thetas.iter().map(|t| tape.constant(t.clone())).collect();
            let params = BlockParams {
                phi: 0.6,
                phi_i: &[0.5, 0.5],
                a: 0.3,
                activation: Activation::Relu,
            };
            for _ in 0..2 {
                x = mffbm_block(&mut tape, x, k, &t[..2], t[2], &params).unwrap();
            }
            let pooled = global_average_pool(&mut tape, x, 3).unwrap();
            tape.value(pooled).clone()
        };
        let base = run(&s, &h0);
        let permuted = run(&s_perm, &p.matmul(&h0).unwrap());
        assert!(base.max_abs_diff(&permuted) < 1e-12);
    }

    #[test]
    fn filter_weights_validated() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::zeros(&[3, 2]));
        let k = tape.constant(Tensor::identity(3));
        let t = tape.constant(Tensor::identity(2));
        assert!(lowpass_layer(&mut tape, h, k, &[t, t], &[0.5, 0.6], Activation::Relu).is_err());
        assert!(lowpass_layer(&mut tape, h, k, &[t], &[0.5, 0.5], Activation::Relu).is_err());
        let bad_k = tape.constant(Tensor::identity(4));
        assert!(highpass_layer(&mut tape, h, bad_k, t, 0.5).is_err());
    }

    #[test]
    fn pooling() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::matrix(3, 2, vec![1., 1., 3., 3., 5., 5.]).unwrap());
        let p = global_average_pool(&mut tape, h, 3).unwrap();
        assert_eq!(tape.value(p).data(), &[3.0, 3.0]);
        let h1 = tape.constant(Tensor::matrix(1, 2, vec![0.3, -2.0]).unwrap());
        let p1 = global_average_pool(&mut tape, h1, 1).unwrap();
        assert_eq!(tape.value(p1), tape.value(h1));
        let perm = tape.constant(Tensor::matrix(3, 2, vec![5., 5., 1., 1., 3., 3.]).unwrap());
        let pp = global_average_pool(&mut tape, perm, 3).unwrap();
        assert_eq!(tape.value(pp), tape.value(p));
    }

    #[test]
    fn fuse_order_and_zero_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut tape = Tape::new();
        let g = tape.constant(Tensor::zeros(&[4, 64]));
        let us: Vec<Var> = (0..3).map(|_| tape.constant(rand_tensor(&mut rng, 4, 64))).collect();
        let z = fuse(&mut tape, Some(g), &us).unwrap();
        let zv = tape.value(z).clone();
        assert_eq!(zv.shape(), &[4, 256]);
        for r in 0..4 {
            assert!(zv.row(r)[..64].iter().all(|&v| v == 0.0));
            for (m, &u) in us.iter().enumerate() {
                assert_eq!(&zv.row(r)[64 * (m + 1)..64 * (m + 2)], tape.value(u).row(r));
            }
        }
        let z2 = fuse(&mut tape, Some(g), &us).unwrap();
        assert_eq!(tape.value(z2), &zv);
        let short = tape.constant(Tensor::zeros(&[3, 64]));
        assert!(fuse(&mut tape, Some(short), &us).is_err());
    }

    #[test]
    fn zero_head_is_uniform() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::full(&[2, 8], 0.4));
        let layers = vec![
            (tape.constant(Tensor::zeros(&[8, 4])), tape.constant(Tensor::zeros(&[1, 4]))),
            (tape.constant(Tensor::zeros(&[4, 3])), tape.constant(Tensor::zeros(&[1, 3]))),
        ];
        let p = classify(&mut tape, z, &layers).unwrap();
        assert!(tape.value(p).data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn argmax_invariant_under_positive_logit_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let logits = rand_tensor(&mut rng, 1, 3);
            let argmax = |t: &Tensor| {
                (0..3).fold(0, |b, i| if t.get(0, i) > t.get(0, b) { i } else { b })
            };
            let s = rng.gen_range(0.01..50.0);
            let mut tape = Tape::new();
            let a = tape.constant(logits.clone());
            let b = tape.constant(logits.scale(s));
            let (pa, pb) = (tape.softmax(a).unwrap(), tape.softmax(b).unwrap());
            assert_eq!(argmax(tape.value(pa)), argmax(tape.value(pb)));
        }
    }
}
