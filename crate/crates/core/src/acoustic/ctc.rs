//! CTC loss via the log-space forward-backward recursion, plus greedy
//! decoding. Output class 0 is the blank; phone `p` is class `p + 1`.

use crate::corpus::adjacent_repeats;
use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, Matrix};

pub const BLANK: usize = 0;

/// `frames x classes` log-probabilities; each row log-sum-exps to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLogProbs(Matrix);

impl FrameLogProbs {
    /// Row-wise log-softmax of raw logits.
    pub fn from_logits(mut logits: Matrix) -> Self {
        for t in 0..logits.rows() {
            let row = logits.row_mut(t);
            let lse = log_sum_exp(row);
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        Self(logits)
    }

    /// Wraps log-probabilities, checking normalization to 1e-9.
    pub fn from_log_probs(lp: Matrix) -> Result<Self> {
        for (t, row) in lp.iter_rows().enumerate() {
            let lse = log_sum_exp(row);
            if lse.is_nan() || lse.abs() > 1e-9 {
                return Err(Error::numeric(
                    format!("log-prob frame {t}"),
                    format!("row log-sum-exp is {lse}, not 0"),
                ));
            }
        }
        Ok(Self(lp))
    }

    pub fn frames(&self) -> usize {
        self.0.rows()
    }

    pub fn classes(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Negative log-likelihood of `phones` and its gradient with respect to the
/// pre-softmax logits that produced `lp`.
pub fn ctc_loss(lp: &FrameLogProbs, phones: &[usize]) -> Result<(f64, Matrix)> {
    let frames = lp.frames();
    let classes = lp.classes();
    let repeats = adjacent_repeats(phones);
    if frames < phones.len() + repeats || frames == 0 {
        return Err(Error::CtcInfeasible {
            frames,
            labels: phones.len(),
            repeats,
        });
    }
    if let Some(&p) = phones.iter().find(|&&p| p + 1 >= classes) {
        return Err(Error::validation("labels", format!("phone {p} has no output class among {classes}")));
    }

    // Blank-augmented label lattice: blank, l1, blank, l2, ..., blank.
    let mut ext = Vec::with_capacity(2 * phones.len() + 1);
    ext.push(BLANK);
    for &p in phones {
        ext.push(p + 1);
        ext.push(BLANK);
    }
    let s_len = ext.len();
    let skip_ok = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];
    let m = lp.matrix();
    let ninf = f64::NEG_INFINITY;

    let mut alpha = Matrix::from_vec(frames, s_len, vec![ninf; frames * s_len])?;
    alpha.row_mut(0)[0] = m.get(0, ext[0]);
    if s_len > 1 {
        alpha.row_mut(0)[1] = m.get(0, ext[1]);
    }
    for t in 1..frames {
        for s in 0..s_len {
            let prev = alpha.row(t - 1);
            let mut terms = [prev[s], ninf, ninf];
            if s >= 1 {
                terms[1] = prev[s - 1];
            }
            if skip_ok(s) {
                terms[2] = prev[s - 2];
            }
            alpha.row_mut(t)[s] = log_sum_exp(&terms) + m.get(t, ext[s]);
        }
    }

    let mut beta = Matrix::from_vec(frames, s_len, vec![ninf; frames * s_len])?;
    let last = frames - 1;
    beta.row_mut(last)[s_len - 1] = m.get(last, ext[s_len - 1]);
    if s_len > 1 {
        beta.row_mut(last)[s_len - 2] = m.get(last, ext[s_len - 2]);
    }
    for t in (0..last).rev() {
        for s in 0..s_len {
            let next = beta.row(t + 1);
            let mut terms = [next[s], ninf, ninf];
            if s + 1 < s_len {
                terms[1] = next[s + 1];
            }
            if s + 2 < s_len && skip_ok(s + 2) {
                terms[2] = next[s + 2];
            }
            beta.row_mut(t)[s] = log_sum_exp(&terms) + m.get(t, ext[s]);
        }
    }

    let tail = if s_len > 1 {
        vec![alpha.get(last, s_len - 1), alpha.get(last, s_len - 2)]
    } else {
        vec![alpha.get(last, 0)]
    };
    let log_p = log_sum_exp(&tail);
    if !log_p.is_finite() {
        return Err(Error::numeric("ctc_loss", "label sequence has zero probability"));
    }

    let mut grad = Matrix::zeros(frames, classes);
    for t in 0..frames {
        let g = grad.row_mut(t);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = m.get(t, k).exp();
        }
        for (s, &k) in ext.iter().enumerate() {
            let a = alpha.get(t, s);
            let b = beta.get(t, s);
            if a == ninf || b == ninf {
                continue;
            }
            g[k] -= (a + b - m.get(t, k) - log_p).exp();
        }
    }
    Ok((-log_p, grad))
}

/// Per-frame argmax, merge repeats, drop blanks. Returns phone indices.
pub fn greedy_decode(lp: &FrameLogProbs) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for row in lp.matrix().iter_rows() {
        let best = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc })
            .0;
        if Some(best) != prev && best != BLANK {
            out.push(best - 1);
        }
        prev = Some(best);
    }
    out
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// `-log P(phones)` by summing over every frame-level path that collapses
    /// to `phones`. Exponential in `frames`; for tiny cases only.
    pub fn brute_force_nll(lp: &FrameLogProbs, phones: &[usize]) -> f64 {
        let frames = lp.frames();
        let classes = lp.classes();
        let target: Vec<usize> = phones.iter().map(|p| p + 1).collect();
        let mut path = vec![0usize; frames];
        let mut total = 0.0f64;
        loop {
            let mut collapsed = Vec::new();
            let mut prev = None;
            for &k in &path {
                if Some(k) != prev && k != BLANK {
                    collapsed.push(k);
                }
                prev = Some(k);
            }
            if collapsed == target {
                let lp_sum: f64 = path.iter().enumerate().map(|(t, &k)| lp.matrix().get(t, k)).sum();
                total += lp_sum.exp();
            }
            // Odometer increment over classes^frames paths.
            let mut i = 0;
            loop {
                if i == frames {
                    return -total.ln();
                }
                path[i] += 1;
                if path[i] < classes {
                    break;
                }
                path[i] = 0;
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn probs(rows: &[&[f64]]) -> FrameLogProbs {
        let m = Matrix::from_rows(&rows.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect::<Vec<_>>()).unwrap();
        FrameLogProbs::from_log_probs(m).unwrap()
    }

    #[test]
    fn single_frame_single_path() {
        // classes: blank, p, q
        let lp = probs(&[&[0.3, 0.6, 0.1]]);
        let (loss, _) = ctc_loss(&lp, &[0]).unwrap();
        assert!((loss - (-(0.6f64).ln())).abs() < 1e-12);
        assert!((loss - 0.51083).abs() < 1e-5);
    }

    #[test]
    fn two_frames_uniform_three_paths() {
        let third = 1.0 / 3.0;
        let lp = probs(&[&[third; 3], &[third; 3]]);
        let (loss, _) = ctc_loss(&lp, &[0]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_an_error() {
        let lp = probs(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(matches!(ctc_loss(&lp, &[0, 0]), Err(Error::CtcInfeasible { repeats: 1, .. })));
        assert!(ctc_loss(&lp, &[0, 0, 0]).is_err());
        assert!(ctc_loss(&lp, &[1]).is_err());
    }

    #[test]
    fn empty_label_sequence_is_all_blanks() {
        let lp = probs(&[&[0.5, 0.5], &[0.25, 0.75]]);
        let (loss, _) = ctc_loss(&lp, &[]).unwrap();
        assert!((loss - -(0.125f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_on_logits() {
        let logits = Matrix::from_rows(&[
            vec![0.1, -0.3, 0.7, 0.0],
            vec![0.5, 0.2, -0.1, 0.3],
            vec![-0.4, 0.9, 0.2, -0.2],
            vec![0.0, 0.1, 0.3, 0.8],
        ])
        .unwrap();
        let labels = [1, 1];
        let (_, grad) = ctc_loss(&FrameLogProbs::from_logits(logits.clone()), &labels).unwrap();
        let eps = 1e-6;
        for i in 0..logits.as_slice().len() {
            let mut p = logits.clone();
            p.as_mut_slice()[i] += eps;
            let mut q = logits.clone();
            q.as_mut_slice()[i] -= eps;
            let fd = (ctc_loss(&FrameLogProbs::from_logits(p), &labels).unwrap().0
                - ctc_loss(&FrameLogProbs::from_logits(q), &labels).unwrap().0)
                / (2.0 * eps);
            assert!((fd - grad.as_slice()[i]).abs() < 1e-7, "{i}: {fd} vs {}", grad.as_slice()[i]);
        }
    }

    fn decode_path(path: &[usize], classes: usize) -> Vec<usize> {
        let rows: Vec<Vec<f64>> = path
            .iter()
            .map(|&k| (0..classes).map(|c| if c == k { 0.0 } else { -5.0 }).collect())
            .collect();
        greedy_decode(&FrameLogProbs::from_logits(Matrix::from_rows(&rows).unwrap()))
    }

    #[test]
    fn greedy_collapse_rules() {
        // p = phone 0 (class 1), q = phone 1 (class 2)
        assert_eq!(decode_path(&[0, 1, 1, 0, 2], 3), vec![0, 1]);
        assert_eq!(decode_path(&[0, 0, 0], 3), Vec::<usize>::new());
        assert_eq!(decode_path(&[1, 0, 1], 3), vec![0, 0]);
    }

    #[test]
    fn log_softmax_rows_normalize_and_shift() {
        let logits = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let shifted = Matrix::from_rows(&[vec![101.0, 102.0, 103.0]]).unwrap();
        let a = FrameLogProbs::from_logits(logits);
        let b = FrameLogProbs::from_logits(shifted);
        for (x, y) in a.matrix().as_slice().iter().zip(b.matrix().as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let total: f64 = a.matrix().row(0).iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(FrameLogProbs::from_log_probs(Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap()).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, usize, usize, Vec<usize>)> {
        (1usize..=6, 1usize..=3).prop_flat_map(|(frames, alphabet)| {
            let classes = alphabet + 1;
            (
                proptest::collection::vec(-3.0f64..3.0, frames * classes),
                Just(frames),
                Just(classes),
                proptest::collection::vec(0..alphabet, 0..=3),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_path_enumeration((logits, frames, classes, labels) in instance()) {
            prop_assume!(frames >= labels.len() + adjacent_repeats(&labels));
            let lp = FrameLogProbs::from_logits(Matrix::from_vec(frames, classes, logits).unwrap());
            let (loss, _) = ctc_loss(&lp, &labels).unwrap();
            let want = oracle::brute_force_nll(&lp, &labels);
            prop_assert!(((loss - want) / want.abs().max(1e-300)).abs() < 1e-10, "{loss} vs {want}");
        }
    }
}
