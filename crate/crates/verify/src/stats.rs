//! Small statistics helpers: grouped jackknife and pooled chi-square.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Estimate and grouped-jackknife standard error of `stat` over rows `0..n`.
///
/// Rows are split into `groups` contiguous blocks; `stat` is re-evaluated with
/// each block left out. Contiguous blocks keep the result independent of any
/// reordering inside a block and reproducible for an ordered sample list.
pub fn grouped_jackknife(n: usize, groups: usize, stat: impl Fn(&[usize]) -> f64) -> (f64, f64) {
    let all: Vec<usize> = (0..n).collect();
    let full = stat(&all);
    let g = groups.clamp(2, n.max(2));
    if n < 2 {
        return (full, f64::NAN);
    }
    let bounds: Vec<usize> = (0..=g).map(|k| k * n / g).collect();
    let mut leave_out = Vec::with_capacity(g);
    let mut idx = Vec::with_capacity(n);
    for k in 0..g {
        idx.clear();
        idx.extend((0..bounds[k]).chain(bounds[k + 1]..n));
        leave_out.push(stat(&idx));
    }
    let mean = leave_out.iter().sum::<f64>() / g as f64;
    let var = leave_out.iter().map(|t| (t - mean).powi(2)).sum::<f64>() * (g as f64 - 1.0) / g as f64;
    (full, var.sqrt())
}

/// Pearson chi-square with bins of expected count below `min_expected` pooled
/// into one bin. Returns `(statistic, degrees of freedom, p-value)`.
pub fn chi_square_pvalue(observed: &[f64], expected: &[f64], min_expected: f64) -> (f64, usize, f64) {
    let mut chi2 = 0.0;
    let mut bins = 0usize;
    let (mut po, mut pe) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= min_expected {
            chi2 += (o - e).powi(2) / e;
            bins += 1;
        } else {
            po += o;
            pe += e;
        }
    }
    if pe > 0.0 {
        if pe >= min_expected || bins == 0 {
            chi2 += (po - pe).powi(2) / pe;
            bins += 1;
        } else if po > 0.0 {
            // a pooled tail with tiny expectation but observed mass is still evidence
            chi2 += (po - pe).powi(2) / pe.max(1e-300);
            bins += 1;
        }
    }
    let dof = bins.saturating_sub(1);
    if dof == 0 {
        return (chi2, 0, if chi2 == 0.0 { 1.0 } else { 0.0 });
    }
    let p = ChiSquared::new(dof as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN);
    (chi2, dof, p)
}

pub(crate) fn mean_over(idx: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    idx.iter().map(|&i| f(i)).sum::<f64>() / idx.len() as f64
}
