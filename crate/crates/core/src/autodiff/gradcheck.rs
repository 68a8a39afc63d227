use alloc::vec::Vec;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::rng::SeededRng;
use crate::Result;

/// Which coordinates [`grad_check`] perturbs.
#[derive(Copy, Clone, Debug)]
pub enum Selection {
    All,
    /// Up to `per_tensor` coordinates drawn from every tensor.
    Sample { per_tensor: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor, coordinate)` of the worst coordinate.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares reverse-mode gradients of `f` against central differences with
/// step `h`. `f` receives one parameter node per tensor in `params` and must
/// return a scalar node.
///
/// The error of a coordinate is `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn grad_check<'d, F>(params: &[Tensor], h: f64, selection: Selection, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<'d>, &[Var]) -> Result<Var>,
{
    let mut eval = |ps: &[Tensor], want_grads: bool| -> Result<(f64, Vec<Vec<f64>>)> {
        let mut tape: Tape<'d> = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param_owned(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        let value = tape.scalar(loss);
        if !want_grads {
            return Ok((value, Vec::new()));
        }
        let grads = tape.backward(loss)?;
        let g = vars
            .iter()
            .zip(ps)
            .map(|(&v, p)| grads.get_or_zeros(v, p.len()))
            .collect();
        Ok((value, g))
    };

    let (_, analytic) = eval(params, true)?;
    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, p) in params.iter().enumerate() {
        let coords: Vec<usize> = match selection {
            Selection::All => (0..p.len()).collect(),
            Selection::Sample { per_tensor, seed } => {
                let mut rng = SeededRng::new(seed).derive(ti as u64);
                let take = per_tensor.min(p.len());
                rng.sample_indices(p.len(), take)
            }
        };
        for ci in coords {
            let orig = p.data()[ci];
            work[ti].data_mut()[ci] = orig + h;
            let (plus, _) = eval(&work, false)?;
            work[ti].data_mut()[ci] = orig - h;
            let (minus, _) = eval(&work, false)?;
            work[ti].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[ti][ci];
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            let err = (a - numeric).abs() / denom;
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (ti, ci);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
