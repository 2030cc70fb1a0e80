use std::fs;
use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use lsi_core::asymptotics::{
    lemma2_scaling, verify_bhi_instability, verify_heavytail, verify_instability_suite, verify_theorem1,
    BhiInstabilityRow, InstabilityParams, InstabilityTheorem, SeriesPoint, Verdict, DEFAULT_K_GRID,
};
use lsi_core::density::{make_bump_family, make_heavytail_family, make_shifted_gaussian, PiecewiseLogDensity};
use lsi_core::functionals::compute_report;
use lsi_core::serde_ext::{fmt17, to_json17};
use lsi_core::transport::{hwi_chain, HwiReport};
use lsi_core::uncertainty::{bhi_deficit, fourier_wiener_remainder, CarlenReport, OptimizerParams, WeightSpec};

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Subcommand, Clone, Debug)]
pub enum Command {
    /// Fit delta, H, W2^2 and moments of the bump sequence against Theorem 1.
    Theorem1,
    /// Functionals of the shifted Gaussians g_b.
    ExampleGb,
    /// C_k, the uniform floor and the second moment of the heavy-tail family.
    Heavytail,
    /// Finite-k trend checks for one instability theorem.
    Instability {
        #[arg(value_enum)]
        which: Which,
    },
    /// The HWI chain over a grid of bump measures and shifted Gaussians.
    HwiChain,
    /// delta - remainder - delta_BH for the Fourier-Wiener identity.
    BhiDeficit,
    /// Normalized distances to the Gaussians under a power weight.
    BhiPw,
    /// Normalized distances under an inverse-Gaussian weight, plus the log-norm scaling.
    BhiEw,
    /// delta_BH on a grid of Gaussians G_{a,r}.
    BhiOptimizerCheck,
    /// Rewrite the JSON fixtures used by the regression tests.
    FixturesRegen,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Which {
    LsiW2,
    LsiW1,
    TalW2,
    TalW1,
}

impl From<Which> for InstabilityTheorem {
    fn from(w: Which) -> Self {
        match w {
            Which::LsiW2 => InstabilityTheorem::LsiW2,
            Which::LsiW1 => InstabilityTheorem::LsiW1,
            Which::TalW2 => InstabilityTheorem::TalW2,
            Which::TalW1 => InstabilityTheorem::TalW1,
        }
    }
}

/// What a command produced. `pass` drives the exit code.
pub struct Artifact {
    pub csv: String,
    pub json: String,
    pub pass: bool,
    pub summary: Vec<String>,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(lsi_core::Error),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Compute(e) => write!(f, "computation failed: {e}"),
            RunError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<lsi_core::Error> for RunError {
    fn from(e: lsi_core::Error) -> Self {
        RunError::Compute(e)
    }
}

type Run = Result<Artifact, RunError>;

fn config_err(field: &'static str, reason: impl Into<String>) -> RunError {
    RunError::Config(ConfigError { field, reason: reason.into() })
}

fn bump_grid(ks: &[f64]) -> Result<(), RunError> {
    if ks.iter().any(|k| *k < 2.0) {
        return Err(config_err("k", "bump measures need k >= 2"));
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String, RunError> {
    Ok(to_json17(v)?)
}

fn table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn claim_lines(v: &Verdict) -> Vec<String> {
    v.per_claim
        .iter()
        .map(|(name, c)| {
            format!(
                "{} {name}: fitted {} predicted {} tolerance {}",
                if c.pass { "PASS" } else { "FAIL" },
                fmt17(c.fitted),
                fmt17(c.predicted),
                fmt17(c.tolerance)
            )
        })
        .collect()
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn series_csv(series: &[SeriesPoint]) -> String {
    let Some(first) = series.first() else { return String::new() };
    let mut header = vec!["k", "I", "H", "delta", "w2_sq", "delta_tal"].into_iter().map(String::from).collect::<Vec<_>>();
    header.extend(first.moments.iter().map(|m| format!("m{}", m.p)));
    header.extend(first.wasserstein.iter().map(|m| format!("W{}", m.p)));
    header.extend(first.ln_lp_dist.iter().map(|m| format!("ln_l{}", m.p)));
    let rows = series.iter().map(|x| {
        let mut c = vec![fmt17(x.k), fmt17(x.fisher_info), fmt17(x.rel_entropy), fmt17(x.lsi_deficit), opt17(x.w2_sq), opt17(x.talagrand_deficit)];
        c.extend(x.moments.iter().chain(&x.wasserstein).chain(&x.ln_lp_dist).map(|v| fmt17(v.value)));
        c.join(",")
    });
    table(&header.join(","), rows)
}

fn verdict_artifact(v: &Verdict, csv: String) -> Run {
    Ok(Artifact { csv, json: json(v)?, pass: v.pass(), summary: claim_lines(v) })
}

pub fn run(cmd: &Command, cfg: &ExperimentConfig) -> Run {
    match cmd {
        Command::Theorem1 => {
            let ks = cfg.k_or(&DEFAULT_K_GRID);
            bump_grid(&ks)?;
            let v = verify_theorem1(cfg.s_or(1.0), cfg.t_or(2.0), &ks, &cfg.p_or(&[1.0, 3.0]))?;
            verdict_artifact(&v, series_csv(&v.series))
        }
        Command::ExampleGb => example_gb(cfg),
        Command::Heavytail => {
            let (v, pts) = verify_heavytail(&cfg.k_or(&[2.0, 5.0, 10.0, 20.0]))?;
            let csv = table(
                "k,C_k,infimum,m2",
                pts.iter().map(|p| [fmt17(p.k), fmt17(p.c_k), fmt17(p.infimum), fmt17(p.second_moment.to_f64())].join(",")),
            );
            verdict_artifact(&v, csv)
        }
        Command::Instability { which } => {
            let ks = cfg.k_or(&DEFAULT_K_GRID);
            bump_grid(&ks)?;
            let params = InstabilityParams { m: cfg.m.unwrap_or(5.0), p: cfg.p.as_ref().map_or(2.0, |p| p[0]) };
            let v = verify_instability_suite((*which).into(), params, &ks)?;
            verdict_artifact(&v, series_csv(&v.series))
        }
        Command::HwiChain => hwi(cfg),
        Command::BhiDeficit => carlen(cfg),
        Command::BhiPw => bhi_distance(cfg, false),
        Command::BhiEw => bhi_distance(cfg, true),
        Command::BhiOptimizerCheck => optimizer_check(cfg),
        Command::FixturesRegen => fixtures(cfg),
    }
}

#[derive(Serialize)]
struct GbRow {
    b: f64,
    fisher_info: f64,
    rel_entropy: f64,
    lsi_deficit: f64,
    m2: f64,
}

fn example_gb(cfg: &ExperimentConfig) -> Run {
    let bs = cfg.b.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 3.0, 5.0]);
    let rows = bs
        .par_iter()
        .map(|&b| {
            let r = compute_report(&make_shifted_gaussian(b)?, &[2.0])?;
            Ok(GbRow {
                b,
                fisher_info: r.fisher_info.value,
                rel_entropy: r.rel_entropy.value,
                lsi_deficit: r.lsi_deficit.value,
                m2: r.moment(2.0).and_then(|m| m.finite()).unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>, lsi_core::Error>>()?;
    let tol = 1e-10;
    let pass = rows.iter().all(|r| {
        let b2 = r.b * r.b;
        (r.fisher_info - b2).abs() <= tol
            && (r.rel_entropy - b2 / 2.0).abs() <= tol
            && r.lsi_deficit.abs() <= tol
            && (r.m2 - 1.0 - b2).abs() <= tol
    });
    let csv = table(
        "b,I,H,delta,m2",
        rows.iter().map(|r| [r.b, r.fisher_info, r.rel_entropy, r.lsi_deficit, r.m2].map(fmt17).join(",")),
    );
    let summary = vec![format!("{} shifted Gaussians exact to {tol:e}", if pass { "PASS" } else { "FAIL" })];
    Ok(Artifact { csv, json: json(&rows)?, pass, summary })
}

fn hwi(cfg: &ExperimentConfig) -> Run {
    let ss = cfg.s.map_or(vec![0.5, 1.0, 2.0], |s| vec![s]);
    let ts = cfg.t.map_or(vec![0.5, 1.0, 2.0], |t| vec![t]);
    let ks = cfg.k_or(&[3.0, 5.0, 10.0, 20.0]);
    bump_grid(&ks)?;
    let mut jobs: Vec<(f64, f64, f64)> = Vec::new();
    for &s in &ss {
        for &t in &ts {
            jobs.extend(ks.iter().map(|&k| (s, t, k)));
        }
    }
    let mut reports = jobs
        .par_iter()
        .map(|&(s, t, k)| hwi_chain(&make_bump_family(s, t, k)?))
        .collect::<Result<Vec<HwiReport>, _>>()?;
    for b in [0.5, 1.0, 2.0, 3.0] {
        reports.push(hwi_chain(&make_shifted_gaussian(b)?)?);
    }
    let failed = reports.iter().filter(|r| !r.holds).count();
    let summary = vec![format!("{} HWI chain on {} measures, {failed} violations", if failed == 0 { "PASS" } else { "FAIL" }, reports.len())];
    Ok(Artifact {
        csv: table(HwiReport::CSV_HEADER, reports.iter().map(HwiReport::csv_row)),
        json: json(&reports)?,
        pass: failed == 0,
        summary,
    })
}

fn carlen(cfg: &ExperimentConfig) -> Run {
    let grid = cfg.grid()?;
    let ks = cfg.k_or(&[6.0, 10.0]);
    bump_grid(&ks)?;
    let (s, t) = (cfg.s_or(1.0), cfg.t_or(0.5));
    let mut measures: Vec<PiecewiseLogDensity> =
        vec![PiecewiseLogDensity::standard_gaussian(), make_shifted_gaussian(1.0)?, make_shifted_gaussian(2.0)?];
    for &k in &ks {
        measures.push(make_bump_family(s, t, k)?);
    }
    let reports = measures.par_iter().map(|f| fourier_wiener_remainder(f, &grid)).collect::<Result<Vec<CarlenReport>, _>>()?;
    let tol = 5e-6;
    let worst = reports.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    Ok(Artifact {
        csv: table(CarlenReport::CSV_HEADER, reports.iter().map(CarlenReport::csv_row)),
        json: json(&reports)?,
        pass: worst <= tol,
        summary: vec![format!("{} max |delta - R - delta_BH| = {}", if worst <= tol { "PASS" } else { "FAIL" }, fmt17(worst))],
    })
}

#[derive(Serialize)]
struct BhiOutput<'a> {
    verdict: &'a Verdict,
    rows: &'a [BhiInstabilityRow],
}

fn bhi_distance(cfg: &ExperimentConfig, inverse_gaussian: bool) -> Run {
    let w = cfg.weight_spec()?.unwrap_or(if inverse_gaussian { WeightSpec::InvGauss(1.0) } else { WeightSpec::Power(1.0) });
    match (inverse_gaussian, w) {
        (true, WeightSpec::InvGauss(t)) if t > 0.0 => {}
        (false, WeightSpec::Power(_) | WeightSpec::Lebesgue) => {}
        (true, _) => return Err(config_err("weight", "bhi-ew needs invgauss:THETA with THETA > 0")),
        (false, _) => return Err(config_err("weight", "bhi-pw needs power:LAMBDA or lebesgue")),
    }
    let ks = cfg.k_or(&[4.0, 6.0, 8.0]);
    bump_grid(&ks)?;
    let ps = cfg.p_or(&[4.0]);
    if let WeightSpec::InvGauss(t) = w {
        if let Some(p) = ps.iter().find(|p| **p <= t) {
            return Err(config_err("p", format!("need p > theta, got p = {p}")));
        }
    }
    let (s, t) = (cfg.s_or(1.0), cfg.t_or(0.5));
    let q = cfg.quadrature();
    let pairs: Vec<(f64, WeightSpec)> = ps.iter().map(|&p| (p, w)).collect();
    let (mut v, rows) = verify_bhi_instability(s, t, &ks, &pairs, 0.1, None, &q)?;
    if let WeightSpec::InvGauss(theta) = w {
        let lk: Vec<f64> = (3..=10).map(f64::from).collect();
        for &p in &ps {
            let l2 = lemma2_scaling(s, t, &lk, p, theta, &q)?;
            for (name, c) in l2.per_claim {
                v.per_claim.insert(format!("lemma2_p{p}_{name}"), c);
            }
            v.params.insert(format!("lemma2_p{p}"), serde_json::to_value(&l2.params).map_err(lsi_core::Error::from)?);
        }
    }
    let csv = table(
        "k,weight,p,ln_h_norm,ln_distance,ratio,a,at_lower_bound",
        rows.iter().map(|r| {
            [fmt17(r.k), r.weight.clone(), fmt17(r.p), fmt17(r.ln_h_norm), fmt17(r.ln_distance), fmt17(r.ratio), fmt17(r.a), r.at_lower_bound.to_string()]
                .join(",")
        }),
    );
    Ok(Artifact { csv, json: json(&BhiOutput { verdict: &v, rows: &rows })?, pass: v.pass(), summary: claim_lines(&v) })
}

#[derive(Serialize)]
struct OptimizerRow {
    a: f64,
    r: f64,
    entropy_x: f64,
    entropy_xi: f64,
    delta_bh: f64,
    n: usize,
}

fn optimizer_check(cfg: &ExperimentConfig) -> Run {
    let grid = cfg.grid()?;
    let pi = std::f64::consts::PI;
    let jobs: Vec<(f64, f64)> =
        [pi / 4.0, pi / 2.0, pi, 2.0 * pi, 4.0 * pi].iter().flat_map(|&a| [-3.0, 0.0, 1.0].map(|r| (a, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(a, r)| {
            let rep = bhi_deficit(&OptimizerParams::new(a, r)?, &grid)?;
            Ok(OptimizerRow { a, r, entropy_x: rep.entropy_x.value, entropy_xi: rep.entropy_xi.value, delta_bh: rep.delta_bh, n: rep.grid.n })
        })
        .collect::<Result<Vec<_>, lsi_core::Error>>()?;
    let worst = rows.iter().map(|r| r.delta_bh.abs()).fold(0.0, f64::max);
    let pass = worst <= 1e-6;
    Ok(Artifact {
        csv: table(
            "a,r,S_x,S_xi,delta_bh,n",
            rows.iter().map(|r| [fmt17(r.a), fmt17(r.r), fmt17(r.entropy_x), fmt17(r.entropy_xi), fmt17(r.delta_bh), r.n.to_string()].join(",")),
        ),
        json: json(&rows)?,
        pass,
        summary: vec![format!("{} max |delta_BH| = {}", if pass { "PASS" } else { "FAIL" }, fmt17(worst))],
    })
}

/// Densities whose piece lists and reports are pinned by fixtures.
pub fn fixture_measures() -> lsi_core::Result<Vec<(&'static str, PiecewiseLogDensity)>> {
    Ok(vec![
        ("bump_s1_t2_k10", make_bump_family(1.0, 2.0, 10.0)?),
        ("bump_s1_t0.5_k6", make_bump_family(1.0, 0.5, 6.0)?),
        ("shifted_gaussian_b3", make_shifted_gaussian(3.0)?),
        ("heavytail_k5", make_heavytail_family(5.0)?),
    ])
}

fn fixtures(cfg: &ExperimentConfig) -> Run {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("fixtures"));
    fs::create_dir_all(&dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, f) in fixture_measures()? {
        let report = compute_report(&f, &[1.0, 2.0, 4.0])?;
        for (suffix, body) in [("density", json(&f)?), ("report", json(&report)?)] {
            let path = dir.join(format!("{name}.{suffix}.json"));
            write(&path, &body)?;
            written.push(path.display().to_string());
        }
    }
    Ok(Artifact { csv: table("file", written.clone()), json: json(&written)?, pass: true, summary: vec![format!("wrote {} fixtures", written.len())] })
}

pub fn write(path: &Path, body: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| RunError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}
