//! Siamese comparison: one shared encoder embeds both functions, then a
//! two-branch head scores the pair. The head concatenates the elementwise
//! absolute difference and product of the two encodings, squashes the
//! result through a sigmoid, projects it with a single weight matrix onto
//! two logits, and softmaxes them into (dissimilar, similar) probabilities.
//! Both branches are symmetric in their inputs, so scores are exactly
//! order-independent.

mod checkpoint;
mod train;

pub use checkpoint::{load_model, save_model, CHECKPOINT_VERSION};
pub use train::{resolve_pairs, train, TrainConfig, TrainPair};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::AstNode;
use crate::error::{Error, Result};
use crate::treelstm::{EncoderParams, TreeForward};

/// Probability clamp for the log loss; keeps perfect predictions finite.
const P_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    /// Probability the two functions are unrelated.
    pub dissim: f64,
    /// Probability the two functions are homologous. The two fields sum
    /// to 1; ranking uses this one.
    pub sim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub encoder: EncoderParams,
    /// Head projection, `(2 * hidden) x 2`.
    pub w: Array2<f64>,
}

impl SiameseModel {
    pub fn zeros(hidden: usize, embed: usize, vocab: usize) -> Result<Self> {
        let encoder = EncoderParams::zeros(hidden, embed, vocab)?;
        Ok(SiameseModel {
            w: Array2::zeros((2 * hidden, 2)),
            encoder,
        })
    }

    pub fn seeded(hidden: usize, embed: usize, vocab: usize, seed: u64) -> Result<Self> {
        let encoder = EncoderParams::seeded(hidden, embed, vocab, seed)?;
        // distinct stream so head weights do not mirror the embeddings
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let bound = 1.0 / ((2 * hidden) as f64).sqrt();
        let mut w = Array2::zeros((2 * hidden, 2));
        for x in w.iter_mut() {
            *x = rng.random_range(-bound..bound);
        }
        Ok(SiameseModel { encoder, w })
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.hidden_size()
    }

    pub fn embed_size(&self) -> usize {
        self.encoder.embed_size()
    }

    pub fn vocab_size(&self) -> usize {
        self.encoder.vocab_size()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_size(), self.embed_size(), self.vocab_size())
            .expect("dims validated at construction")
    }

    /// Encoder groups first (their declaration order), head last.
    pub fn slice_names() -> Vec<&'static str> {
        let mut names = EncoderParams::slice_names().to_vec();
        names.push("w");
        names
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut slices = self.encoder.param_slices();
        slices.push(self.w.as_slice().expect("owned arrays are contiguous"));
        slices
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut slices = self.encoder.param_slices_mut();
        slices.push(self.w.as_slice_mut().expect("owned arrays are contiguous"));
        slices
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }
}

struct HeadForward {
    s: Array1<f64>, // sigmoid of [ |h1-h2| ; h1*h2 ], length 2n
    p: PairScore,
}

fn head_forward(h1: &Array1<f64>, h2: &Array1<f64>, w: &Array2<f64>) -> HeadForward {
    let n = h1.len();
    let mut v = Array1::zeros(2 * n);
    for k in 0..n {
        v[k] = (h1[k] - h2[k]).abs();
        v[n + k] = h1[k] * h2[k];
    }
    let s = v.mapv(|x| 1.0 / (1.0 + (-x).exp()));
    let z = w.t().dot(&s);
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let p = PairScore {
        dissim: e0 / (e0 + e1),
        sim: e1 / (e0 + e1),
    };
    HeadForward { s, p }
}

/// Scores two already-computed encodings.
pub fn score_pair(h1: &Array1<f64>, h2: &Array1<f64>, w: &Array2<f64>) -> Result<PairScore> {
    let n = h1.len();
    if h2.len() != n {
        return Err(Error::Param(format!(
            "encodings of different lengths: {} vs {}",
            n,
            h2.len()
        )));
    }
    if w.dim() != (2 * n, 2) {
        return Err(Error::Param(format!(
            "head weights {:?} do not fit encodings of length {n}",
            w.dim()
        )));
    }
    Ok(head_forward(h1, h2, w).p)
}

/// Encodes both functions and scores the pair.
pub fn similarity(a: &AstNode, b: &AstNode, model: &SiameseModel) -> Result<PairScore> {
    let h1 = crate::treelstm::encode_tree(a, &model.encoder)?;
    let h2 = crate::treelstm::encode_tree(b, &model.encoder)?;
    score_pair(&h1, &h2, &model.w)
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(P_CLAMP, 1.0 - P_CLAMP)
}

fn bce_from(p: &PairScore, homologous: bool) -> f64 {
    let y = if homologous { [0.0, 1.0] } else { [1.0, 0.0] };
    let pc = [clamp_p(p.dissim), clamp_p(p.sim)];
    let mut loss = 0.0;
    for k in 0..2 {
        loss -= y[k] * pc[k].ln() + (1.0 - y[k]) * (1.0 - pc[k]).ln();
    }
    loss / 2.0
}

/// Binary cross-entropy of a pair score against its ground-truth label,
/// averaged over the two output components.
pub fn bce_loss(score: &PairScore, homologous: bool) -> f64 {
    bce_from(score, homologous)
}

/// Loss of one labelled pair under the current model.
pub fn pair_loss(model: &SiameseModel, a: &AstNode, b: &AstNode, homologous: bool) -> Result<f64> {
    Ok(bce_from(&similarity(a, b, model)?, homologous))
}

/// Computes the loss of one labelled pair and accumulates its parameter
/// gradients (encoder and head) into `grads`.
pub fn pair_grads(
    model: &SiameseModel,
    a: &AstNode,
    b: &AstNode,
    homologous: bool,
    grads: &mut SiameseModel,
) -> Result<f64> {
    let n = model.hidden_size();
    if grads.hidden_size() != n
        || grads.embed_size() != model.embed_size()
        || grads.vocab_size() != model.vocab_size()
    {
        return Err(Error::Param("gradient buffer dimensions differ from model".into()));
    }

    let t1 = TreeForward::encode(a, &model.encoder)?;
    let t2 = TreeForward::encode(b, &model.encoder)?;
    let h1 = t1.root_h();
    let h2 = t2.root_h();
    let head = head_forward(h1, h2, &model.w);
    let loss = bce_from(&head.p, homologous);

    // d(loss)/d(p), with the same clamp the loss uses
    let y = if homologous { [0.0, 1.0] } else { [1.0, 0.0] };
    let p = [head.p.dissim, head.p.sim];
    let mut dp = [0.0; 2];
    for k in 0..2 {
        let pc = clamp_p(p[k]);
        dp[k] = -0.5 * (y[k] / pc - (1.0 - y[k]) / (1.0 - pc));
    }

    // softmax: dz_k = p_k * (dp_k - sum_j dp_j p_j)
    let dot = dp[0] * p[0] + dp[1] * p[1];
    let dz = ndarray::arr1(&[p[0] * (dp[0] - dot), p[1] * (dp[1] - dot)]);

    for i in 0..2 * n {
        grads.w[[i, 0]] += head.s[i] * dz[0];
        grads.w[[i, 1]] += head.s[i] * dz[1];
    }

    let ds = model.w.dot(&dz);
    let dv = &ds * &head.s * &head.s.mapv(|s| 1.0 - s);

    let mut dh1 = Array1::zeros(n);
    let mut dh2 = Array1::zeros(n);
    for k in 0..n {
        let d = h1[k] - h2[k];
        let sign = if d == 0.0 { 0.0 } else { d.signum() };
        dh1[k] = dv[k] * sign + dv[n + k] * h2[k];
        dh2[k] = -dv[k] * sign + dv[n + k] * h1[k];
    }

    t1.backward(&model.encoder, &dh1, &mut grads.encoder)?;
    t2.backward(&model.encoder, &dh2, &mut grads.encoder)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::NodeLabel;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn label(id: u16) -> NodeLabel {
        NodeLabel::new(id).unwrap()
    }

    fn leaf(id: u16) -> AstNode {
        AstNode::leaf(label(id))
    }

    fn ast_a() -> AstNode {
        AstNode::new(
            label(2),
            vec![
                AstNode::new(label(10), vec![leaf(36), leaf(37)]),
                AstNode::new(label(6), vec![leaf(36)]),
            ],
        )
    }

    fn ast_b() -> AstNode {
        AstNode::new(
            label(1),
            vec![AstNode::new(label(18), vec![leaf(36), leaf(37)]), leaf(9)],
        )
    }

    #[test]
    fn zero_head_scores_half_half() {
        let mut model = SiameseModel::seeded(4, 3, 43, 1).unwrap();
        model.w.fill(0.0);
        let p = similarity(&ast_a(), &ast_b(), &model).unwrap();
        assert_eq!(p.dissim, 0.5);
        assert_eq!(p.sim, 0.5);
    }

    #[test]
    fn score_is_exactly_symmetric() {
        for seed in 0..5 {
            let model = SiameseModel::seeded(6, 4, 43, seed).unwrap();
            let ab = similarity(&ast_a(), &ast_b(), &model).unwrap();
            let ba = similarity(&ast_b(), &ast_a(), &model).unwrap();
            assert_eq!(ab.sim.to_bits(), ba.sim.to_bits());
            assert_eq!(ab.dissim.to_bits(), ba.dissim.to_bits());
        }
    }

    #[test]
    fn score_components_sum_to_one() {
        for seed in 0..10 {
            let model = SiameseModel::seeded(5, 3, 43, seed).unwrap();
            let p = similarity(&ast_a(), &ast_b(), &model).unwrap();
            assert!((p.sim + p.dissim - 1.0).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&p.sim));
        }
    }

    #[test]
    fn bce_hand_cases() {
        let half = PairScore {
            dissim: 0.5,
            sim: 0.5,
        };
        assert_relative_eq!(bce_loss(&half, true), 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(bce_loss(&half, false), 2f64.ln(), epsilon = 1e-12);

        let confident = PairScore {
            dissim: 0.0,
            sim: 1.0,
        };
        assert!(bce_loss(&confident, true) < 1e-10);
        // confidently wrong: large but finite
        let wrong = bce_loss(&confident, false);
        assert!(wrong.is_finite() && wrong > 20.0);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let model = SiameseModel::seeded(4, 3, 43, 1).unwrap();
        let h1 = Array1::zeros(4);
        let h2 = Array1::zeros(5);
        assert!(score_pair(&h1, &h2, &model.w).is_err());
        assert!(score_pair(&h2, &h2, &model.w).is_err());
    }

    #[test]
    fn head_and_encoder_gradients_match_central_differences() {
        let model = SiameseModel::seeded(3, 2, 43, 99).unwrap();
        let (a, b) = (ast_a(), ast_b());

        let mut grads = model.zeros_like();
        pair_grads(&model, &a, &b, true, &mut grads).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let eps = 1e-5;
        let sizes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
        for (group, &size) in sizes.iter().enumerate() {
            for _ in 0..2 {
                let idx = rng.random_range(0..size);
                let mut plus = model.clone();
                plus.param_slices_mut()[group][idx] += eps;
                let mut minus = model.clone();
                minus.param_slices_mut()[group][idx] -= eps;
                let numeric = (pair_loss(&plus, &a, &b, true).unwrap()
                    - pair_loss(&minus, &a, &b, true).unwrap())
                    / (2.0 * eps);
                let analytic = grads.param_slices()[group][idx];
                let rel = (analytic - numeric).abs()
                    / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "group {} [{idx}]: analytic {analytic} vs numeric {numeric}",
                    SiameseModel::slice_names()[group]
                );
            }
        }
    }
}
