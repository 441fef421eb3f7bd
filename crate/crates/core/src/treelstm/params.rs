//! Encoder parameters. Input weights `w_*` map a label embedding into the
//! hidden space; recurrence weights `u_*_l` / `u_*_r` consume the left and
//! right child hidden states. The forget gates share one input weight and
//! bias but keep four distinct recurrence matrices (`u_f_<gate><child>`),
//! so each child's cell line is forgotten independently.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    hidden: usize,
    embed: usize,
    vocab: usize,

    pub embedding: Array2<f64>, // vocab x embed

    pub w_i: Array2<f64>, // hidden x embed
    pub u_i_l: Array2<f64>, // hidden x hidden
    pub u_i_r: Array2<f64>,
    pub b_i: Array1<f64>,

    pub w_o: Array2<f64>,
    pub u_o_l: Array2<f64>,
    pub u_o_r: Array2<f64>,
    pub b_o: Array1<f64>,

    pub w_u: Array2<f64>,
    pub u_u_l: Array2<f64>,
    pub u_u_r: Array2<f64>,
    pub b_u: Array1<f64>,

    pub w_f: Array2<f64>,
    pub u_f_ll: Array2<f64>, // left gate, left state
    pub u_f_lr: Array2<f64>, // left gate, right state
    pub u_f_rl: Array2<f64>, // right gate, left state
    pub u_f_rr: Array2<f64>, // right gate, right state
    pub b_f: Array1<f64>,
}

fn check_dims(hidden: usize, embed: usize, vocab: usize) -> Result<()> {
    if hidden == 0 || embed == 0 || vocab == 0 {
        return Err(Error::Param(format!(
            "encoder dimensions must be >= 1, got hidden={hidden} embed={embed} vocab={vocab}"
        )));
    }
    Ok(())
}

impl EncoderParams {
    pub fn zeros(hidden: usize, embed: usize, vocab: usize) -> Result<Self> {
        check_dims(hidden, embed, vocab)?;
        Ok(EncoderParams {
            hidden,
            embed,
            vocab,
            embedding: Array2::zeros((vocab, embed)),
            w_i: Array2::zeros((hidden, embed)),
            u_i_l: Array2::zeros((hidden, hidden)),
            u_i_r: Array2::zeros((hidden, hidden)),
            b_i: Array1::zeros(hidden),
            w_o: Array2::zeros((hidden, embed)),
            u_o_l: Array2::zeros((hidden, hidden)),
            u_o_r: Array2::zeros((hidden, hidden)),
            b_o: Array1::zeros(hidden),
            w_u: Array2::zeros((hidden, embed)),
            u_u_l: Array2::zeros((hidden, hidden)),
            u_u_r: Array2::zeros((hidden, hidden)),
            b_u: Array1::zeros(hidden),
            w_f: Array2::zeros((hidden, embed)),
            u_f_ll: Array2::zeros((hidden, hidden)),
            u_f_lr: Array2::zeros((hidden, hidden)),
            u_f_rl: Array2::zeros((hidden, hidden)),
            u_f_rr: Array2::zeros((hidden, hidden)),
            b_f: Array1::zeros(hidden),
        })
    }

    /// Seeded init: weights and embeddings uniform in ±1/sqrt(fan_in),
    /// biases zero. Same seed, same parameters.
    pub fn seeded(hidden: usize, embed: usize, vocab: usize, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(hidden, embed, vocab)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = Self::slice_names();
        for (name, slice) in names.iter().zip(params.param_slices_mut()) {
            if name.starts_with('b') {
                continue;
            }
            let fan_in = if name.starts_with('u') { hidden } else { embed };
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in slice {
                *x = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden, self.embed, self.vocab).expect("dims validated at construction")
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn embed_size(&self) -> usize {
        self.embed
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Stable names for the flat views below, in the same order.
    pub fn slice_names() -> [&'static str; 19] {
        [
            "embedding", "w_i", "u_i_l", "u_i_r", "b_i", "w_o", "u_o_l", "u_o_r", "b_o", "w_u",
            "u_u_l", "u_u_r", "b_u", "w_f", "u_f_ll", "u_f_lr", "u_f_rl", "u_f_rr", "b_f",
        ]
    }

    /// Flat row-major views of every parameter group, in declaration order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        vec![
            self.embedding.as_slice().expect("owned arrays are contiguous"),
            self.w_i.as_slice().unwrap(),
            self.u_i_l.as_slice().unwrap(),
            self.u_i_r.as_slice().unwrap(),
            self.b_i.as_slice().unwrap(),
            self.w_o.as_slice().unwrap(),
            self.u_o_l.as_slice().unwrap(),
            self.u_o_r.as_slice().unwrap(),
            self.b_o.as_slice().unwrap(),
            self.w_u.as_slice().unwrap(),
            self.u_u_l.as_slice().unwrap(),
            self.u_u_r.as_slice().unwrap(),
            self.b_u.as_slice().unwrap(),
            self.w_f.as_slice().unwrap(),
            self.u_f_ll.as_slice().unwrap(),
            self.u_f_lr.as_slice().unwrap(),
            self.u_f_rl.as_slice().unwrap(),
            self.u_f_rr.as_slice().unwrap(),
            self.b_f.as_slice().unwrap(),
        ]
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.embedding.as_slice_mut().expect("owned arrays are contiguous"),
            self.w_i.as_slice_mut().unwrap(),
            self.u_i_l.as_slice_mut().unwrap(),
            self.u_i_r.as_slice_mut().unwrap(),
            self.b_i.as_slice_mut().unwrap(),
            self.w_o.as_slice_mut().unwrap(),
            self.u_o_l.as_slice_mut().unwrap(),
            self.u_o_r.as_slice_mut().unwrap(),
            self.b_o.as_slice_mut().unwrap(),
            self.w_u.as_slice_mut().unwrap(),
            self.u_u_l.as_slice_mut().unwrap(),
            self.u_u_r.as_slice_mut().unwrap(),
            self.b_u.as_slice_mut().unwrap(),
            self.w_f.as_slice_mut().unwrap(),
            self.u_f_ll.as_slice_mut().unwrap(),
            self.u_f_lr.as_slice_mut().unwrap(),
            self.u_f_rl.as_slice_mut().unwrap(),
            self.u_f_rr.as_slice_mut().unwrap(),
            self.b_f.as_slice_mut().unwrap(),
        ]
    }
}
