//! Stage orchestration shared by every subcommand.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use temperley_core::{
    build_system, build_temperleyan, count_tilings, hole_and_centered, sample_exact, sample_many, validate_region,
    ExpectedHeightField, HeightField, KasteleynSystem, LatticeSquare, LatticeVertex, PolyominoRegion, Tiling, VertexFunction,
    VertexIndex,
};
use temperley_surface::{
    DiscreteGaussian, DiscreteGaussianParams, HarmonicSurface, SurfaceData, SurfaceOptions, TorusKernel,
};
use temperley_verify::{
    contour_covariance_k2, gof_hole_law, moment_suite, trend_report, ContourCovariance, GofReport, MomentReport,
    PredictionBundle, QueryKind, SampleRow, ScalePoint, VerifyError,
};

use crate::artifacts::{Artifacts, Manifest};
use crate::config::ExperimentConfig;
use crate::render::render_svg;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Build,
    Count,
    Sample,
    Heights,
    Harmonic,
    Riemann,
    Predict,
    Verify,
    Render,
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Build => "build",
            Command::Count => "count",
            Command::Sample => "sample",
            Command::Heights => "heights",
            Command::Harmonic => "harmonic",
            Command::Riemann => "riemann",
            Command::Predict => "predict",
            Command::Verify => "verify",
            Command::Render => "render",
            Command::Run => "run",
        }
    }

    fn any(self, set: &[Command]) -> bool {
        set.contains(&self) || self == Command::Run
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub eps_index: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GateResult {
    pub name: String,
    pub passed: bool,
    /// Reported only when false (coarser lattice scales).
    pub gated: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct Outcome {
    pub command: Command,
    pub manifest: Option<Manifest>,
    pub gates: Vec<GateResult>,
    pub report: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed || !g.gated)
    }
}

/// Per-sample seed of lattice scale `k`; scale 0 uses the master seed itself.
pub fn scale_seed(master: u64, k: usize) -> u64 {
    master.wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Tilings in the text format: one `wx,wy-bx,by` line per domino, samples
/// separated by `# sample k` lines.
pub fn tilings_to_text(tilings: &[Tiling]) -> String {
    let mut s = String::new();
    for (k, t) in tilings.iter().enumerate() {
        let _ = writeln!(s, "# sample {k}");
        s.push_str(&t.to_string());
    }
    s
}

pub fn tilings_from_text(text: &str) -> Result<Vec<Tiling>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut started = false;
    for line in text.lines() {
        if line.starts_with("# sample") {
            if started {
                out.push(cur.parse::<Tiling>().map_err(|e| anyhow!(e))?);
            }
            cur.clear();
            started = true;
        } else if !line.starts_with('#') {
            cur.push_str(line);
            cur.push('\n');
        }
    }
    if started {
        out.push(cur.parse::<Tiling>().map_err(|e| anyhow!(e))?);
    }
    Ok(out)
}

fn gate(gates: &mut Vec<GateResult>, name: impl Into<String>, passed: bool, gated: bool, detail: impl Into<String>) {
    gates.push(GateResult { name: name.into(), passed, gated, detail: detail.into() });
}

#[derive(Serialize)]
struct RegionDump<'a> {
    eps: f64,
    squares: usize,
    genus: usize,
    removed_square: Option<temperley_core::LatticeSquare>,
    added_squares: &'a [temperley_core::LatticeSquare],
    report: temperley_core::RegionReport,
}

#[derive(Serialize)]
struct HarmonicDump {
    h: f64,
    genus: usize,
    tau: Vec<Vec<f64>>,
    tau_from_periods: Vec<Vec<f64>>,
    queries: Vec<[f64; 2]>,
    f_at_queries: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

#[derive(Serialize)]
struct ContourCheck {
    i: usize,
    j: usize,
    predicted: f64,
    contour: Option<ContourCovariance>,
    relative_error: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct Predictions<'a> {
    bundle: &'a PredictionBundle,
    contour: Vec<ContourCheck>,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    seed: u64,
    samples: usize,
    eps: Vec<f64>,
    gates: &'a [GateResult],
    passed: bool,
}

struct Continuum {
    data: SurfaceData,
    surface: HarmonicSurface,
}

struct Scale {
    k: usize,
    eps: f64,
    region: PolyominoRegion,
    system: KasteleynSystem,
}

/// Runs `cmd` on a validated configuration. The rayon pool is sized by
/// `opts.threads`; results do not depend on it.
pub fn execute(cmd: Command, config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let mut cfg = config.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    // dense kernels run sequentially so that the thread count cannot change rounding
    faer::set_global_parallelism(faer::Par::Seq);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().context("building worker pool")?;
    pool.install(|| execute_inner(cmd, &cfg, opts))
}

fn execute_inner(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let hash = cfg.hash();
    let out = opts.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut report = String::new();
    let mut gates = Vec::new();
    let genus = cfg.domain.genus();
    let scale_ids: Vec<usize> = match opts.eps_index {
        Some(k) if k < cfg.eps.len() => vec![k],
        Some(k) => bail!("--eps-index {k} out of range: config lists {} lattice spacings", cfg.eps.len()),
        None => (0..cfg.eps.len()).collect(),
    };
    let finest = scale_ids.iter().copied().min_by(|&a, &b| cfg.eps[a].total_cmp(&cfg.eps[b])).unwrap_or(0);

    if cmd == Command::Validate {
        let _ = writeln!(report, "config OK (hash {hash})");
        for &k in &scale_ids {
            let region = build_temperleyan(&cfg.domain, cfg.eps[k]).with_context(|| format!("stage region (eps index {k})"))?;
            let r = validate_region(&region);
            let _ = writeln!(report, "eps[{k}] = {}: {} squares, {}", cfg.eps[k], region.len(), if r.passed { "valid" } else { "INVALID" });
            gate(&mut gates, format!("region[{k}]"), r.passed, true, r.issues.join("; "));
        }
        return Ok(Outcome { command: cmd, manifest: None, gates, report });
    }

    let mut art = Artifacts::new(&out, &hash)?;
    art.write_json("config.json", "experiment_config", cfg)?;

    let needs_surface = cmd.any(&[Command::Harmonic, Command::Riemann, Command::Predict, Command::Verify]);
    let continuum = if needs_surface {
        let opts = SurfaceOptions { h: cfg.h, imag_tolerance: cfg.imag_tolerance };
        let (data, surface) = SurfaceData::compute(&cfg.domain, opts).context("stage harmonic/riemann")?;
        Some(Continuum { data, surface })
    } else {
        None
    };
    if let Some(c) = &continuum {
        surface_gates(cfg, &c.data, &mut gates);
        if cmd.any(&[Command::Harmonic]) {
            let f_at_queries = cfg.queries.iter().map(|q| c.surface.fields().iter().map(|f| f.value_at(*q)).collect()).collect();
            let dump = HarmonicDump {
                h: cfg.h,
                genus,
                tau: c.data.tau.clone(),
                tau_from_periods: c.data.tau_from_periods.clone(),
                queries: cfg.queries.clone(),
                f_at_queries,
                residuals: c.surface.fields().iter().map(|f| f.residual()).collect(),
            };
            art.write_json("harmonic.json", "harmonic", &dump)?;
        }
        if cmd.any(&[Command::Riemann, Command::Harmonic]) {
            art.write_json("surface.json", "surface_data", &c.data)?;
        }
        let _ = writeln!(report, "continuum: genus {genus}, tau {:?}, e {:?}", c.data.tau, c.data.e);
    }
    let bundle = match &continuum {
        Some(c) if cmd.any(&[Command::Predict, Command::Verify]) => {
            let b = PredictionBundle::new(&c.surface, &c.data, &cfg.queries).context("stage predict")?;
            let contour = if genus == 1 { contour_checks(cfg, c, &b, &mut gates)? } else { Vec::new() };
            art.write_json("predictions.json", "predictions", &Predictions { bundle: &b, contour })?;
            Some(b)
        }
        _ => None,
    };

    let needs_scales = cmd.any(&[Command::Build, Command::Count, Command::Sample, Command::Heights, Command::Verify, Command::Render]);
    let mut trend_points = Vec::new();
    if needs_scales {
        for &k in &scale_ids {
            let eps = cfg.eps[k];
            let region = build_temperleyan(&cfg.domain, eps).with_context(|| format!("stage region (eps index {k})"))?;
            let r = validate_region(&region);
            gate(&mut gates, format!("region[{k}]"), r.passed, true, r.issues.join("; "));
            art.write_json(
                &format!("region_{k}.json"),
                "region",
                &RegionDump {
                    eps,
                    squares: region.len(),
                    genus: region.genus(),
                    removed_square: region.removed_square(),
                    added_squares: region.added_squares(),
                    report: r.clone(),
                },
            )?;
            art.write_text(&format!("region_{k}.txt"), &region.to_text_grid())?;
            let _ = writeln!(report, "eps[{k}] = {eps}: {} squares, genus {}", region.len(), region.genus());
            if cmd == Command::Build {
                continue;
            }
            let system = build_system(&region).with_context(|| format!("stage kasteleyn (eps index {k})"))?;
            let scale = Scale { k, eps, region, system };
            if cmd.any(&[Command::Count]) {
                let count = count_tilings(&scale.system);
                art.write_json(&format!("count_{k}.json"), "tiling_count", &count)?;
                let _ = writeln!(report, "  log #tilings = {}", count.log_count);
            }
            if cmd == Command::Count {
                continue;
            }
            let tp = run_samples(cmd, cfg, &scale, continuum.as_ref(), bundle.as_ref(), k == finest, &mut art, &mut gates, &mut report)?;
            trend_points.extend(tp);
        }
    }
    if cmd.any(&[Command::Verify]) && genus >= 1 && scale_ids.len() >= 2 {
        let t = trend_report(trend_points);
        gate(
            &mut gates,
            "trend",
            t.toward_prediction,
            true,
            format!(
                "variance gap by scale (coarse to fine): {:?}",
                t.scales.iter().map(|s| (s.eps, s.variance_gap, s.tv_distance)).collect::<Vec<_>>()
            ),
        );
        art.write_json("trend.json", "trend", &t)?;
    }

    let passed = gates.iter().all(|g| g.passed || !g.gated);
    let has_gates = !gates.is_empty();
    if has_gates {
        let summary = Summary {
            command: cmd.name(),
            seed: cfg.seed,
            samples: cfg.samples,
            eps: scale_ids.iter().map(|&k| cfg.eps[k]).collect(),
            gates: &gates,
            passed,
        };
        art.write_json("summary.json", "summary", &summary)?;
        let _ = writeln!(report, "gates:");
        for g in &gates {
            let mark = match (g.gated, g.passed) {
                (false, _) => "info",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            let _ = writeln!(report, "  [{mark}] {} {}", g.name, g.detail);
        }
        let _ = writeln!(report, "overall: {}", if passed { "PASS" } else { "FAIL" });
    }
    let manifest = art.finish(cmd.name(), cfg.seed, has_gates.then_some(passed))?;
    Ok(Outcome { command: cmd, manifest: Some(manifest), gates, report })
}

fn surface_gates(cfg: &ExperimentConfig, d: &SurfaceData, gates: &mut Vec<GateResult>) {
    let g = &cfg.gates;
    if d.genus == 0 {
        return;
    }
    let c = &d.checks;
    gate(
        gates,
        "tau_positive_definite",
        c.tau_symmetric && c.tau_min_eigenvalue > 0.0,
        true,
        format!("min eigenvalue {:.3e}", c.tau_min_eigenvalue),
    );
    gate(
        gates,
        "period_consistency",
        c.ib_inverse_vs_tau <= g.period_consistency_max,
        true,
        format!("||iB^-1 - tau||/||tau|| = {:.3e}", c.ib_inverse_vs_tau),
    );
    let zmax = d.zero_divisor_residuals.iter().copied().fold(0.0, f64::max);
    gate(gates, "zero_divisor", zmax <= g.zero_divisor_max, true, format!("max residual {zmax:.3e}"));
    let imax = d.e_imag.iter().map(|v| v.abs()).fold(0.0, f64::max);
    gate(gates, "shift_real", imax <= g.imag_shift_max, true, format!("max |Im e| {imax:.3e}"));
}

const MAX_CONTOUR_PAIRS: usize = 6;

fn contour_checks(
    cfg: &ExperimentConfig,
    c: &Continuum,
    b: &PredictionBundle,
    gates: &mut Vec<GateResult>,
) -> Result<Vec<ContourCheck>> {
    let kernel = TorusKernel::new(c.data.theta_params()?, c.data.e[0])?;
    let interior: Vec<usize> = (0..b.len()).filter(|&i| b.kinds[i] == QueryKind::Interior).collect();
    let mut out = Vec::new();
    for (x, &i) in interior.iter().enumerate() {
        for &j in &interior[x + 1..] {
            if out.len() >= MAX_CONTOUR_PAIRS {
                break;
            }
            let predicted = b.predicted_covariance(i, j, true).expect("interior pair");
            match contour_covariance_k2(&c.surface, &kernel, cfg.queries[i], cfg.queries[j]) {
                Ok(v) => {
                    let rel = (v.value - predicted).abs() / predicted.abs();
                    gate(
                        gates,
                        format!("contour[{i},{j}]"),
                        rel <= cfg.gates.contour_rel_max && v.imag_residue.abs() <= 1e-8,
                        true,
                        format!("contour {:.6} vs predicted {predicted:.6}, rel {rel:.2e}", v.value),
                    );
                    out.push(ContourCheck { i, j, predicted, contour: Some(v), relative_error: Some(rel), note: None });
                }
                Err(VerifyError::PathsIntersect) => out.push(ContourCheck {
                    i,
                    j,
                    predicted,
                    contour: None,
                    relative_error: None,
                    note: Some("paths intersect; pair skipped".into()),
                }),
                Err(e) => return Err(e).context("stage predict (contour)"),
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_samples(
    cmd: Command,
    cfg: &ExperimentConfig,
    scale: &Scale,
    continuum: Option<&Continuum>,
    bundle: Option<&PredictionBundle>,
    is_finest: bool,
    art: &mut Artifacts,
    gates: &mut Vec<GateResult>,
    report: &mut String,
) -> Result<Option<ScalePoint>> {
    let k = scale.k;
    let seed = scale_seed(cfg.seed, k);
    let stage = |s: &str| format!("stage {s} (eps index {k})");
    let tilings = if cmd == Command::Render {
        vec![sample_exact(&scale.system, seed).with_context(|| stage("sample"))?]
    } else {
        sample_many(&scale.system, seed, cfg.samples).with_context(|| stage("sample"))?
    };
    if cmd.any(&[Command::Sample]) {
        art.write_text(&format!("tilings_{k}.txt"), &tilings_to_text(&tilings))?;
    }
    let index = VertexIndex::new(&scale.region);
    let heights: Vec<HeightField> = tilings
        .par_iter()
        .map(|t| HeightField::compute(&index, &scale.region, t))
        .collect::<Result<_, _>>()
        .with_context(|| stage("heights"))?;
    if cmd.any(&[Command::Render]) {
        let overlay = cfg.render.height_overlay.then(|| &heights[0]);
        art.write_svg(&format!("render_{k}.svg"), &render_svg(&scale.region, &tilings[0], overlay))?;
    }
    if cmd == Command::Render || cmd == Command::Sample {
        return Ok(None);
    }
    let expected = ExpectedHeightField::compute(&index, &scale.system).with_context(|| stage("expected heights"))?;
    if cmd.any(&[Command::Heights]) {
        art.write_text(&format!("heights_{k}_sample0.csv"), &heights[0].to_csv())?;
        let mut s = String::from("x,y,expected\n");
        for (v, e) in index.vertices().iter().zip(expected.values()) {
            let _ = writeln!(s, "{},{},{}", v.p, v.q, e);
        }
        art.write_text(&format!("expected_{k}.csv"), &s)?;
    }
    let g = scale.region.genus();
    let holes: Vec<LatticeVertex> = (1..=g)
        .map(|j| scale.region.hole_vertex(j).ok_or_else(|| anyhow!("region has no vertex on hole {j}")))
        .collect::<Result<_>>()?;
    if cmd == Command::Heights {
        let mut s = String::from("sample");
        for j in 0..g {
            let _ = write!(s, ",z_{}", j + 1);
        }
        s.push('\n');
        for (n, hf) in heights.iter().enumerate() {
            let _ = write!(s, "{n}");
            for v in &holes {
                let z = hf.get(*v).expect("hole vertex") as f64 - expected.get(*v).expect("hole vertex");
                let _ = write!(s, ",{z}");
            }
            s.push('\n');
        }
        art.write_text(&format!("holes_{k}.csv"), &s)?;
        return Ok(None);
    }
    let (Some(c), Some(bundle)) = (continuum, bundle) else {
        return Ok(None);
    };
    let qsquares: Vec<LatticeSquare> = cfg
        .queries
        .iter()
        .map(|q| scale.region.query_square(*q).ok_or_else(|| anyhow!("no lattice square near {q:?}")))
        .collect::<Result<_>>()?;
    let fields: Vec<&dyn VertexFunction> = c.surface.fields().iter().map(|f| f as &dyn VertexFunction).collect();
    let rows: Vec<SampleRow> = heights
        .iter()
        .map(|hf| {
            let (hh, tilde) = hole_and_centered(&scale.region, hf, &expected, &fields, &qsquares)?;
            let centered = qsquares
                .iter()
                .map(|sq| {
                    let corner = |v: LatticeVertex| hf.get(v).expect("query corner") as f64 - expected.get(v).expect("query corner");
                    sq.corners().into_iter().map(corner).sum::<f64>() / 4.0
                })
                .collect();
            Ok(SampleRow { z: hh.z, tilde, centered })
        })
        .collect::<Result<_, temperley_core::HeightError>>()
        .with_context(|| stage("corrected heights"))?;
    art.write_text(&format!("rows_{k}.csv"), &rows_csv(&rows, g, cfg.queries.len()))?;

    let moments = moment_suite(&rows, bundle, &cfg.gates).with_context(|| stage("verify moments"))?;
    art.write_json(&format!("moments_{k}.json"), "moment_report", &moments)?;
    art.write_text(&format!("moments_{k}.txt"), &moments.to_table())?;
    moment_gate(&moments, k, scale.eps, is_finest, gates);
    let _ = write!(report, "{}", moments.to_table());
    if g == 0 {
        return Ok(None);
    }
    let law = DiscreteGaussian::new(DiscreteGaussianParams { tau: c.data.tau.clone(), e: c.data.e.clone() })?;
    let z: Vec<Vec<f64>> = rows.iter().map(|r| r.z.clone()).collect();
    let gof = gof_hole_law(&z, &law, &cfg.gates).with_context(|| stage("verify hole law"))?;
    art.write_json(&format!("gof_{k}.json"), "gof_report", &gof)?;
    art.write_text(&format!("gof_{k}.txt"), &gof.to_table())?;
    gof_gate(&gof, k, scale.eps, is_finest, gates);
    let _ = write!(report, "{}", gof.to_table());
    Ok(Some(ScalePoint::from_report(scale.eps, &gof)))
}

fn rows_csv(rows: &[SampleRow], g: usize, q: usize) -> String {
    let mut s = String::from("sample");
    for j in 0..g {
        let _ = write!(s, ",z_{}", j + 1);
    }
    for i in 0..q {
        let _ = write!(s, ",tilde_{i}");
    }
    for i in 0..q {
        let _ = write!(s, ",centered_{i}");
    }
    s.push('\n');
    for (n, r) in rows.iter().enumerate() {
        let _ = write!(s, "{n}");
        for v in r.z.iter().chain(&r.tilde).chain(&r.centered) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn moment_gate(m: &MomentReport, k: usize, eps: f64, gated: bool, gates: &mut Vec<GateResult>) {
    let failed: Vec<&str> = m.failures().map(|e| e.name.as_str()).collect();
    gate(
        gates,
        format!("moments[{k}]"),
        m.all_pass,
        gated,
        format!("eps {eps}: {} statistics, failing: {failed:?}", m.entries.len()),
    );
}

fn gof_gate(r: &GofReport, k: usize, eps: f64, gated: bool, gates: &mut Vec<GateResult>) {
    gate(
        gates,
        format!("hole_law[{k}]"),
        r.pass,
        gated,
        format!(
            "eps {eps}: TV {:.4} (< {}), p {:.3e}, offset {:?}, mod4 {}",
            r.tv_distance, r.tv_max, r.p_value, r.support_offset, r.mod4_consistent
        ),
    );
}
