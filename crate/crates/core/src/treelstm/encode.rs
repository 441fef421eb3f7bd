//! Bottom-up encoding over the binarized AST, plus reverse-mode gradients.
//! The tree is flattened post-order so children are always computed before
//! their parent; the backward pass walks the same array in reverse.

use ndarray::{Array1, Array2, ArrayView1};

use super::{binarize, BinTree, EncoderParams};
use crate::corpus::AstNode;
use crate::error::{Error, Result};

/// Hidden and cell state of one encoded node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

struct FlatNode {
    row: usize, // embedding row
    left: Option<usize>,
    right: Option<usize>,
}

/// Everything the backward pass needs per node.
struct NodeForward {
    i: Array1<f64>,
    o: Array1<f64>,
    u: Array1<f64>,
    f_l: Array1<f64>,
    f_r: Array1<f64>,
    c: Array1<f64>,
    h: Array1<f64>,
}

fn sigmoid(a: Array1<f64>) -> Array1<f64> {
    a.mapv(|x| 1.0 / (1.0 + (-x).exp()))
}

fn affine(
    w: &Array2<f64>,
    e: ArrayView1<'_, f64>,
    u_l: &Array2<f64>,
    h_l: Option<&Array1<f64>>,
    u_r: &Array2<f64>,
    h_r: Option<&Array1<f64>>,
    b: &Array1<f64>,
) -> Array1<f64> {
    let mut a = w.dot(&e) + b;
    if let Some(h) = h_l {
        a += &u_l.dot(h);
    }
    if let Some(h) = h_r {
        a += &u_r.dot(h);
    }
    a
}

/// One gated update. Absent children act as zero hidden and cell state.
fn forward_node(
    e: ArrayView1<'_, f64>,
    left: Option<(&Array1<f64>, &Array1<f64>)>,  // (h_l, c_l)
    right: Option<(&Array1<f64>, &Array1<f64>)>, // (h_r, c_r)
    p: &EncoderParams,
) -> NodeForward {
    let h_l = left.map(|(h, _)| h);
    let h_r = right.map(|(h, _)| h);
    let i = sigmoid(affine(&p.w_i, e, &p.u_i_l, h_l, &p.u_i_r, h_r, &p.b_i));
    let o = sigmoid(affine(&p.w_o, e, &p.u_o_l, h_l, &p.u_o_r, h_r, &p.b_o));
    let u = affine(&p.w_u, e, &p.u_u_l, h_l, &p.u_u_r, h_r, &p.b_u).mapv(f64::tanh);
    // one forget gate per child, shared input weight and bias
    let f_l = sigmoid(affine(&p.w_f, e, &p.u_f_ll, h_l, &p.u_f_lr, h_r, &p.b_f));
    let f_r = sigmoid(affine(&p.w_f, e, &p.u_f_rl, h_l, &p.u_f_rr, h_r, &p.b_f));
    let mut c = &i * &u;
    if let Some((_, c_l)) = left {
        c += &(c_l * &f_l);
    }
    if let Some((_, c_r)) = right {
        c += &(c_r * &f_r);
    }
    let h = &o * &c.mapv(f64::tanh);
    NodeForward { i, o, u, f_l, f_r, c, h }
}

/// Encodes a single node from explicit inputs; children default to zero
/// state when absent.
pub fn encode_node(
    e: &Array1<f64>,
    left: Option<&NodeState>,
    right: Option<&NodeState>,
    params: &EncoderParams,
) -> Result<NodeState> {
    if e.len() != params.embed_size() {
        return Err(Error::Param(format!(
            "embedding of length {} fed to encoder expecting {}",
            e.len(),
            params.embed_size()
        )));
    }
    for state in [left, right].into_iter().flatten() {
        if state.h.len() != params.hidden_size() || state.c.len() != params.hidden_size() {
            return Err(Error::Param(format!(
                "child state of length {}/{} fed to encoder expecting {}",
                state.h.len(),
                state.c.len(),
                params.hidden_size()
            )));
        }
    }
    let nf = forward_node(
        e.view(),
        left.map(|s| (&s.h, &s.c)),
        right.map(|s| (&s.h, &s.c)),
        params,
    );
    Ok(NodeState { h: nf.h, c: nf.c })
}

/// A fully encoded tree, keeping per-node gate activations so gradients can
/// be accumulated afterwards.
pub struct TreeForward {
    nodes: Vec<FlatNode>,
    fwd: Vec<NodeForward>,
}

impl TreeForward {
    pub fn encode(ast: &AstNode, params: &EncoderParams) -> Result<TreeForward> {
        let bt = binarize(ast);
        let nodes = flatten(&bt, params.vocab_size())?;
        let mut fwd: Vec<NodeForward> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let e = params.embedding.row(node.row);
            let left = node.left.map(|l| (&fwd[l].h, &fwd[l].c));
            let right = node.right.map(|r| (&fwd[r].h, &fwd[r].c));
            fwd.push(forward_node(e, left, right, params));
        }
        Ok(TreeForward { nodes, fwd })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// The function encoding: hidden state of the root.
    pub fn root_h(&self) -> &Array1<f64> {
        &self.fwd.last().expect("trees are never empty").h
    }

    /// Accumulates `d(loss)/d(params)` into `grads` given the gradient of
    /// the loss with respect to the root hidden state.
    pub fn backward(
        &self,
        params: &EncoderParams,
        d_root_h: &Array1<f64>,
        grads: &mut EncoderParams,
    ) -> Result<()> {
        let n = params.hidden_size();
        if d_root_h.len() != n {
            return Err(Error::Param(format!(
                "upstream gradient of length {} against hidden size {n}",
                d_root_h.len()
            )));
        }
        if grads.hidden_size() != n
            || grads.embed_size() != params.embed_size()
            || grads.vocab_size() != params.vocab_size()
        {
            return Err(Error::Param("gradient buffer dimensions differ from parameters".into()));
        }

        let count = self.nodes.len();
        let mut dh: Vec<Array1<f64>> = (0..count).map(|_| Array1::zeros(n)).collect();
        let mut dc: Vec<Array1<f64>> = (0..count).map(|_| Array1::zeros(n)).collect();
        dh[count - 1] += d_root_h;

        for k in (0..count).rev() {
            let node = &self.nodes[k];
            let nf = &self.fwd[k];
            let dh_k = dh[k].clone();

            let tanh_c = nf.c.mapv(f64::tanh);
            let d_o = &dh_k * &tanh_c;
            let dc_k = &dc[k] + &(&dh_k * &nf.o * &tanh_c.mapv(|t| 1.0 - t * t));
            let d_i = &dc_k * &nf.u;
            let d_u = &dc_k * &nf.i;

            // cell line into the children, gated by the respective forget gate
            if let Some(l) = node.left {
                dc[l] += &(&dc_k * &nf.f_l);
            }
            if let Some(r) = node.right {
                dc[r] += &(&dc_k * &nf.f_r);
            }

            // gate pre-activation gradients
            let a_i = &d_i * &nf.i * &nf.i.mapv(|s| 1.0 - s);
            let a_o = &d_o * &nf.o * &nf.o.mapv(|s| 1.0 - s);
            let a_u = &d_u * &nf.u.mapv(|t| 1.0 - t * t);
            let a_fl = node.left.map(|l| {
                let d_fl = &dc_k * &self.fwd[l].c;
                &d_fl * &nf.f_l * &nf.f_l.mapv(|s| 1.0 - s)
            });
            let a_fr = node.right.map(|r| {
                let d_fr = &dc_k * &self.fwd[r].c;
                &d_fr * &nf.f_r * &nf.f_r.mapv(|s| 1.0 - s)
            });

            let e = params.embedding.row(node.row);
            add_outer(&mut grads.w_i, &a_i, e);
            add_outer(&mut grads.w_o, &a_o, e);
            add_outer(&mut grads.w_u, &a_u, e);
            grads.b_i += &a_i;
            grads.b_o += &a_o;
            grads.b_u += &a_u;

            let mut d_e = params.w_i.t().dot(&a_i) + params.w_o.t().dot(&a_o) + params.w_u.t().dot(&a_u);
            if let Some(a) = &a_fl {
                add_outer(&mut grads.w_f, a, e);
                grads.b_f += a;
                d_e += &params.w_f.t().dot(a);
            }
            if let Some(a) = &a_fr {
                add_outer(&mut grads.w_f, a, e);
                grads.b_f += a;
                d_e += &params.w_f.t().dot(a);
            }
            grads.embedding.row_mut(node.row).scaled_add(1.0, &d_e);

            if let Some(l) = node.left {
                let h_l = &self.fwd[l].h;
                add_outer(&mut grads.u_i_l, &a_i, h_l.view());
                add_outer(&mut grads.u_o_l, &a_o, h_l.view());
                add_outer(&mut grads.u_u_l, &a_u, h_l.view());
                let mut d = params.u_i_l.t().dot(&a_i)
                    + params.u_o_l.t().dot(&a_o)
                    + params.u_u_l.t().dot(&a_u);
                if let Some(a) = &a_fl {
                    add_outer(&mut grads.u_f_ll, a, h_l.view());
                    d += &params.u_f_ll.t().dot(a);
                }
                if let Some(a) = &a_fr {
                    add_outer(&mut grads.u_f_rl, a, h_l.view());
                    d += &params.u_f_rl.t().dot(a);
                }
                dh[l] += &d;
            }
            if let Some(r) = node.right {
                let h_r = &self.fwd[r].h;
                add_outer(&mut grads.u_i_r, &a_i, h_r.view());
                add_outer(&mut grads.u_o_r, &a_o, h_r.view());
                add_outer(&mut grads.u_u_r, &a_u, h_r.view());
                let mut d = params.u_i_r.t().dot(&a_i)
                    + params.u_o_r.t().dot(&a_o)
                    + params.u_u_r.t().dot(&a_u);
                if let Some(a) = &a_fl {
                    add_outer(&mut grads.u_f_lr, a, h_r.view());
                    d += &params.u_f_lr.t().dot(a);
                }
                if let Some(a) = &a_fr {
                    add_outer(&mut grads.u_f_rr, a, h_r.view());
                    d += &params.u_f_rr.t().dot(a);
                }
                dh[r] += &d;
            }
        }
        Ok(())
    }
}

/// `m += a ⊗ b`
fn add_outer(m: &mut Array2<f64>, a: &Array1<f64>, b: ArrayView1<'_, f64>) {
    for (i, &ai) in a.iter().enumerate() {
        m.row_mut(i).scaled_add(ai, &b);
    }
}

/// Encodes a whole AST to its root hidden vector.
pub fn encode_tree(ast: &AstNode, params: &EncoderParams) -> Result<Array1<f64>> {
    Ok(TreeForward::encode(ast, params)?.root_h().clone())
}

/// Post-order flattening; children always precede their parent, the root is
/// last. Rejects labels outside the embedding table.
fn flatten(root: &BinTree, vocab: usize) -> Result<Vec<FlatNode>> {
    enum Step<'a> {
        Enter(&'a BinTree),
        Emit(&'a BinTree),
    }
    let mut out: Vec<FlatNode> = Vec::new();
    let mut results: Vec<usize> = Vec::new();
    let mut stack = vec![Step::Enter(root)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Enter(node) => {
                let row = node.label.row();
                if row >= vocab {
                    return Err(Error::Model(format!(
                        "label {} outside encoder vocabulary of {vocab} rows",
                        node.label
                    )));
                }
                stack.push(Step::Emit(node));
                if let Some(r) = &node.right {
                    stack.push(Step::Enter(r));
                }
                if let Some(l) = &node.left {
                    stack.push(Step::Enter(l));
                }
            }
            Step::Emit(node) => {
                let right = node.right.as_ref().map(|_| results.pop().expect("right emitted"));
                let left = node.left.as_ref().map(|_| results.pop().expect("left emitted"));
                out.push(FlatNode {
                    row: node.label.row(),
                    left,
                    right,
                });
                results.push(out.len() - 1);
            }
        }
    }
    debug_assert_eq!(results.len(), 1);
    Ok(out)
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

    /// if(cmp(var, num), block(return(var), break), asg(var, num))
    fn sample_ast() -> AstNode {
        AstNode::new(
            label(1),
            vec![
                AstNode::new(label(18), vec![leaf(36), leaf(37)]),
                AstNode::new(label(2), vec![AstNode::new(label(6), vec![leaf(36)]), leaf(9)]),
                AstNode::new(label(10), vec![leaf(36), leaf(37)]),
            ],
        )
    }

    #[test]
    fn zero_params_halve_child_cells() {
        let p = EncoderParams::zeros(3, 2, 43).unwrap();
        let e = Array1::zeros(2);
        let c_l = ndarray::arr1(&[0.2, -0.4, 1.0]);
        let c_r = ndarray::arr1(&[1.0, 0.5, -2.0]);
        let left = NodeState {
            h: ndarray::arr1(&[0.3, 0.1, -0.2]),
            c: c_l.clone(),
        };
        let right = NodeState {
            h: Array1::zeros(3),
            c: c_r.clone(),
        };

        // all gates sit at 1/2 and the candidate update is zero
        let one = encode_node(&e, Some(&left), None, &p).unwrap();
        for k in 0..3 {
            assert_relative_eq!(one.c[k], 0.5 * c_l[k], epsilon = 1e-15);
            assert_relative_eq!(one.h[k], 0.5 * (0.5 * c_l[k]).tanh(), epsilon = 1e-15);
        }

        let both = encode_node(&e, Some(&left), Some(&right), &p).unwrap();
        for k in 0..3 {
            assert_relative_eq!(both.c[k], 0.5 * (c_l[k] + c_r[k]), epsilon = 1e-15);
            assert_relative_eq!(both.h[k], 0.5 * (0.5 * (c_l[k] + c_r[k])).tanh(), epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_params_encode_any_tree_to_zero() {
        let p = EncoderParams::zeros(4, 3, 43).unwrap();
        let h = encode_tree(&sample_ast(), &p).unwrap();
        assert!(h.iter().all(|&x| x == 0.0));
    }

    /// Independent scalar-loop implementation of the same update equations.
    mod oracle {
        use super::super::super::BinTree;
        use super::EncoderParams;

        pub struct State {
            pub h: Vec<f64>,
            pub c: Vec<f64>,
        }

        fn sig(x: f64) -> f64 {
            1.0 / (1.0 + (-x).exp())
        }

        fn matvec(m: &ndarray::Array2<f64>, v: &[f64]) -> Vec<f64> {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| m[[r, c]] * v[c]).sum())
                .collect()
        }

        pub fn encode(t: &BinTree, p: &EncoderParams) -> State {
            let n = p.hidden_size();
            let zero = State {
                h: vec![0.0; n],
                c: vec![0.0; n],
            };
            let l = t.left.as_ref().map(|x| encode(x, p)).unwrap_or_else(|| State {
                h: zero.h.clone(),
                c: zero.c.clone(),
            });
            let r = t.right.as_ref().map(|x| encode(x, p)).unwrap_or_else(|| State {
                h: zero.h.clone(),
                c: zero.c.clone(),
            });
            let e: Vec<f64> = p.embedding.row(t.label.row()).to_vec();

            let gate = |w: &ndarray::Array2<f64>,
                        ul: &ndarray::Array2<f64>,
                        ur: &ndarray::Array2<f64>,
                        b: &ndarray::Array1<f64>|
             -> Vec<f64> {
                let we = matvec(w, &e);
                let ulh = matvec(ul, &l.h);
                let urh = matvec(ur, &r.h);
                (0..n).map(|k| we[k] + ulh[k] + urh[k] + b[k]).collect()
            };

            let i: Vec<f64> = gate(&p.w_i, &p.u_i_l, &p.u_i_r, &p.b_i).iter().map(|&x| sig(x)).collect();
            let o: Vec<f64> = gate(&p.w_o, &p.u_o_l, &p.u_o_r, &p.b_o).iter().map(|&x| sig(x)).collect();
            let u: Vec<f64> = gate(&p.w_u, &p.u_u_l, &p.u_u_r, &p.b_u).iter().map(|&x| x.tanh()).collect();
            let fl: Vec<f64> = gate(&p.w_f, &p.u_f_ll, &p.u_f_lr, &p.b_f).iter().map(|&x| sig(x)).collect();
            let fr: Vec<f64> = gate(&p.w_f, &p.u_f_rl, &p.u_f_rr, &p.b_f).iter().map(|&x| sig(x)).collect();

            let c: Vec<f64> = (0..n)
                .map(|k| i[k] * u[k] + l.c[k] * fl[k] + r.c[k] * fr[k])
                .collect();
            let h: Vec<f64> = (0..n).map(|k| o[k] * c[k].tanh()).collect();
            State { h, c }
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        let p = EncoderParams::seeded(3, 4, 43, 12).unwrap();
        let ast = sample_ast();
        let fast = encode_tree(&ast, &p).unwrap();
        let slow = oracle::encode(&binarize(&ast), &p);
        for k in 0..3 {
            assert_relative_eq!(fast[k], slow.h[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_labels_outside_vocabulary() {
        let p = EncoderParams::zeros(3, 2, 5).unwrap();
        let err = encode_tree(&leaf(37), &p).unwrap_err();
        assert!(err.to_string().contains("num"), "{err}");
        assert!(err.to_string().contains('5'), "{err}");
    }

    #[test]
    fn rejects_mismatched_child_state() {
        let p = EncoderParams::zeros(3, 2, 43).unwrap();
        let bad = NodeState {
            h: Array1::zeros(7),
            c: Array1::zeros(7),
        };
        assert!(encode_node(&Array1::zeros(2), Some(&bad), None, &p).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let hidden = 3;
        let params = EncoderParams::seeded(hidden, 2, 43, 77).unwrap();
        let ast = sample_ast();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let probe_dir: Array1<f64> =
            Array1::from_iter((0..hidden).map(|_| rng.random_range(-1.0..1.0)));

        let loss = |p: &EncoderParams| -> f64 {
            encode_tree(&ast, p).unwrap().dot(&probe_dir)
        };

        let mut grads = params.zeros_like();
        TreeForward::encode(&ast, &params)
            .unwrap()
            .backward(&params, &probe_dir, &mut grads)
            .unwrap();

        let eps = 1e-5;
        let group_sizes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
        for (group, &size) in group_sizes.iter().enumerate() {
            for _ in 0..3 {
                let idx = rng.random_range(0..size);
                let mut plus = params.clone();
                plus.param_slices_mut()[group][idx] += eps;
                let mut minus = params.clone();
                minus.param_slices_mut()[group][idx] -= eps;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let analytic = grads.param_slices()[group][idx];
                let rel = (analytic - numeric).abs()
                    / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "group {} [{idx}]: analytic {analytic} vs numeric {numeric} (rel {rel})",
                    EncoderParams::slice_names()[group]
                );
            }
        }
    }

    #[test]
    fn backward_rejects_bad_upstream_length() {
        let p = EncoderParams::zeros(3, 2, 43).unwrap();
        let fwd = TreeForward::encode(&leaf(36), &p).unwrap();
        let mut grads = p.zeros_like();
        assert!(fwd.backward(&p, &Array1::zeros(5), &mut grads).is_err());
    }

    #[test]
    fn encoding_is_deterministic() {
        let p = EncoderParams::seeded(8, 4, 43, 3).unwrap();
        let a = encode_tree(&sample_ast(), &p).unwrap();
        let b = encode_tree(&sample_ast(), &p).unwrap();
        assert_eq!(a, b);
    }
}
