//! Moment gates for the corrected height field and the hole heights.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bundle::{PredictionBundle, QueryKind};
use crate::gates::Gates;
use crate::stats::{grouped_jackknife, mean_over};
use crate::VerifyError;

/// One sample reduced to the quantities the gates need.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    /// Centered hole heights `Z_k = h(v_k) - E h(v_k)`.
    pub z: Vec<f64>,
    /// `h~` at the query points.
    pub tilde: Vec<f64>,
    /// `h - E h` at the query points.
    pub centered: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum GateKind {
    /// Pass iff `|z| <= max`.
    ZScore { max: f64 },
    /// Pass iff `|empirical| <= max`.
    AbsBound { max: f64 },
    /// Reported only.
    Info,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEntry {
    pub name: String,
    pub empirical: f64,
    pub std_error: f64,
    pub predicted: Option<f64>,
    pub z: Option<f64>,
    pub gate: GateKind,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub samples: usize,
    pub genus: usize,
    pub gates: Gates,
    pub entries: Vec<MomentEntry>,
    pub all_pass: bool,
}

impl MomentReport {
    pub fn entry(&self, name: &str) -> Option<&MomentEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MomentEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "moment gates: N = {}, genus = {}", self.samples, self.genus);
        let _ = writeln!(
            s,
            "{:<28} {:>13} {:>11} {:>13} {:>9} {:>12}  result",
            "statistic", "empirical", "std.err", "predicted", "z", "gate"
        );
        for e in &self.entries {
            let pred = e.predicted.map_or("-".to_string(), |p| format!("{p:.6}"));
            let z = e.z.map_or("-".to_string(), |z| format!("{z:.3}"));
            let gate = match e.gate {
                GateKind::ZScore { max } => format!("|z|<={max}"),
                GateKind::AbsBound { max } => format!("|x|<={max:.4}"),
                GateKind::Info => "info".to_string(),
            };
            let result = match (e.gate, e.pass) {
                (GateKind::Info, _) => "",
                (_, true) => "PASS",
                (_, false) => "FAIL",
            };
            let _ = writeln!(
                s,
                "{:<28} {:>13.6} {:>11.6} {:>13} {:>9} {:>12}  {}",
                e.name, e.empirical, e.std_error, pred, z, gate, result
            );
        }
        let _ = writeln!(s, "overall: {}", if self.all_pass { "PASS" } else { "FAIL" });
        s
    }
}

fn z_score(emp: f64, se: f64, pred: f64) -> f64 {
    if se > 0.0 {
        (emp - pred) / se
    } else if (emp - pred).abs() <= 1e-12 * pred.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

struct Builder<'a> {
    n: usize,
    gates: &'a Gates,
    entries: Vec<MomentEntry>,
}

impl Builder<'_> {
    fn z_gate(&mut self, name: String, predicted: f64, stat: impl Fn(&[usize]) -> f64) {
        let (emp, se) = grouped_jackknife(self.n, self.gates.jackknife_groups, stat);
        let z = z_score(emp, se, predicted);
        self.entries.push(MomentEntry {
            name,
            empirical: emp,
            std_error: se,
            predicted: Some(predicted),
            z: Some(z),
            gate: GateKind::ZScore { max: self.gates.z_max },
            pass: z.abs() <= self.gates.z_max,
        });
    }

    fn bound(&mut self, name: String, max: f64, stat: impl Fn(&[usize]) -> f64) {
        let (emp, se) = grouped_jackknife(self.n, self.gates.jackknife_groups, stat);
        self.entries.push(MomentEntry {
            name,
            empirical: emp,
            std_error: se,
            predicted: Some(0.0),
            z: None,
            gate: GateKind::AbsBound { max },
            pass: emp.abs() <= max,
        });
    }

    fn info(&mut self, name: String, predicted: Option<f64>, stat: impl Fn(&[usize]) -> f64) {
        let (emp, se) = grouped_jackknife(self.n, self.gates.jackknife_groups, stat);
        self.entries.push(MomentEntry {
            name,
            empirical: emp,
            std_error: se,
            predicted,
            z: predicted.map(|p| z_score(emp, se, p)),
            gate: GateKind::Info,
            pass: true,
        });
    }
}

/// Runs every moment gate that the query layout supports.
///
/// `h~` has exact mean zero at every lattice scale, so moments are taken about
/// zero rather than about the sample mean. The pointwise variance of `h~`
/// diverges like `log(1/eps)`; it is reported, and the gated quantity is the
/// difference of variances at two interior points, in which the divergence
/// cancels against `(16/pi)(H(z_i, z_i) - H(z_j, z_j))`. The single-point
/// fourth cumulant keeps an O(1) lattice-scale part and is reported only; the
/// gated fourth moment is the four-point Wick sum at distinct queries.
pub fn moment_suite(rows: &[SampleRow], bundle: &PredictionBundle, gates: &Gates) -> Result<MomentReport, VerifyError> {
    let n = rows.len();
    if n < gates.min_moment_samples.max(2) {
        return Err(VerifyError::InsufficientSamples { needed: gates.min_moment_samples.max(2), got: n });
    }
    let q = bundle.len();
    let g = bundle.genus();
    for r in rows {
        if r.tilde.len() != q || r.centered.len() != q || r.z.len() != g {
            return Err(VerifyError::InvalidInput("sample row does not match the prediction bundle".into()));
        }
    }
    let interior: Vec<usize> = (0..q).filter(|&i| bundle.kinds[i] == QueryKind::Interior).collect();
    let t = |i: usize, k: usize| rows[k].tilde[i];
    let m2 = |idx: &[usize], a: usize, b: usize| mean_over(idx, |k| t(a, k) * t(b, k));
    let mut bld = Builder { n, gates, entries: Vec::new() };

    for &i in &interior {
        bld.z_gate(format!("mean_tilde[{i}]"), 0.0, |idx| mean_over(idx, |k| t(i, k)));
    }
    for &i in &interior {
        bld.info(format!("var_tilde[{i}]"), None, |idx| m2(idx, i, i));
    }
    for a in 0..q {
        for b in a + 1..q {
            if let Some(p) = bundle.predicted_covariance(a, b, false) {
                bld.z_gate(format!("cov_tilde[{a},{b}]"), p, |idx| m2(idx, a, b));
            }
        }
    }
    if let Some((&c, rest)) = interior.split_first() {
        for &j in rest {
            if let Some(p) = bundle.variance_difference(c, j) {
                bld.z_gate(format!("var_diff[{c},{j}]"), p, |idx| m2(idx, c, c) - m2(idx, j, j));
            }
        }
    }
    for &i in &interior {
        bld.z_gate(format!("third[{i}]"), 0.0, |idx| mean_over(idx, |k| t(i, k).powi(3)));
    }
    for &i in &interior {
        bld.info(format!("fourth_cumulant[{i}]"), Some(0.0), |idx| {
            let v = m2(idx, i, i);
            mean_over(idx, |k| t(i, k).powi(4)) - 3.0 * v * v
        });
    }
    for (x, &a) in interior.iter().enumerate() {
        for &b in &interior[x + 1..] {
            bld.z_gate(format!("fourth_mixed[{a},{b}]"), 0.0, |idx| {
                let ab = m2(idx, a, b);
                mean_over(idx, |k| (t(a, k) * t(b, k)).powi(2)) - m2(idx, a, a) * m2(idx, b, b) - 2.0 * ab * ab
            });
        }
    }
    if interior.len() >= 4 {
        let w = [interior[0], interior[1], interior[2], interior[3]];
        if let Some(p) = bundle.wick_fourth(w) {
            bld.z_gate(format!("fourth_wick[{},{},{},{}]", w[0], w[1], w[2], w[3]), p, |idx| {
                mean_over(idx, |k| w.iter().map(|&i| t(i, k)).product())
            });
        }
    }

    if g > 0 {
        let zc = |j: usize, k: usize| rows[k].z[j];
        let c = |i: usize, k: usize| rows[k].centered[i];
        let corr_max = gates.corr_factor / (n as f64).sqrt();
        for j in 0..g {
            bld.z_gate(format!("mean_z[{j}]"), 0.0, |idx| mean_over(idx, |k| zc(j, k)));
        }
        for j in 0..g {
            bld.info(format!("var_z_over_4[{j}]"), Some(bundle.x_covariance[j][j]), |idx| {
                let m = mean_over(idx, |k| zc(j, k));
                mean_over(idx, |k| (zc(j, k) - m).powi(2)) / 16.0
            });
        }
        for j in 0..g {
            for &i in &interior {
                bld.bound(format!("corr[z{j},{i}]"), corr_max, |idx| {
                    let mz = mean_over(idx, |k| zc(j, k));
                    let mt = mean_over(idx, |k| t(i, k));
                    let cov = mean_over(idx, |k| (zc(j, k) - mz) * (t(i, k) - mt));
                    let vz = mean_over(idx, |k| (zc(j, k) - mz).powi(2));
                    let vt = mean_over(idx, |k| (t(i, k) - mt).powi(2));
                    if vz > 0.0 && vt > 0.0 {
                        cov / (vz * vt).sqrt()
                    } else {
                        0.0
                    }
                });
            }
        }
        let f = &bundle.f_values;
        for &i in &interior {
            bld.z_gate(format!("decomposition[{i}]"), 0.0, |idx| {
                let var_c = mean_over(idx, |k| c(i, k).powi(2));
                let mut hz = 0.0;
                for a in 0..g {
                    for b in 0..g {
                        hz += f[i][a] * f[i][b] * mean_over(idx, |k| zc(a, k) * zc(b, k));
                    }
                }
                var_c - m2(idx, i, i) - hz
            });
        }
        for (x, &a) in interior.iter().enumerate() {
            for &b in &interior[x + 1..] {
                if let Some(p) = bundle.predicted_covariance(a, b, true) {
                    bld.z_gate(format!("cov_full[{a},{b}]"), p, |idx| mean_over(idx, |k| c(a, k) * c(b, k)));
                }
            }
        }
    }

    let all_pass = bld.entries.iter().all(|e| e.pass);
    Ok(MomentReport { samples: n, genus: g, gates: gates.clone(), entries: bld.entries, all_pass })
}
