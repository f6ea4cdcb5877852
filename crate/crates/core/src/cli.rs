//! Command-line verbs and deterministic file output.

use crate::config::{ResolvedSource, RunConfig};
use crate::design::{
    metric_surface, solve_chi, sweep_filter_width, DesignCache, SolveOutcome, SweepFilter, SweepRequest,
};
use crate::error::{Error, Result};
use crate::herald::{HeraldModel, HeraldReport};
use crate::oracle::{run_suite, REL_TOL};
use crate::pdc::{build_jsa, JsaGrid};
use crate::schmidt::{schmidt_decompose, SchmidtDecomposition};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "fockherald",
    version,
    about = "Heralded Fock-state metrics from parametric down-conversion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Verb {
    /// Sampled JSA magnitude and axes
    Jsa,
    /// Schmidt coefficients, entropy and leading modes
    Schmidt,
    /// Herald probability and conditional metrics
    Herald,
    /// Fidelity-target χ over a set of filters
    Sweep,
    /// Metrics over a (χ, η) grid
    Surface,
    /// Closed forms against the brute-force Fock-space oracle
    OracleCheck,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Jsa => "jsa",
            Verb::Schmidt => "schmidt",
            Verb::Herald => "herald",
            Verb::Sweep => "sweep",
            Verb::Surface => "surface",
            Verb::OracleCheck => "oracle-check",
        }
    }
}

/// Files to write plus human-readable summary lines.
#[derive(Debug, Default)]
pub struct Artifact {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
    pub failures: usize,
}

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "none".into())
}

fn human(x: f64) -> String {
    format!("{x:.4}")
}

fn human_sci(x: f64) -> String {
    format!("{x:.3e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(hash: &str, units: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# fockherald {VERSION}");
        let _ = writeln!(text, "# config_sha256 {hash}");
        let _ = writeln!(text, "# units {units}");
        if !columns.is_empty() {
            let _ = writeln!(text, "{}", columns.join(","));
        }
        Csv { text }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

struct Context {
    cfg: RunConfig,
    hash: String,
    stem: String,
}

impl Context {
    fn new(cfg: RunConfig, verb: Verb) -> Result<Self> {
        let hash = cfg.hash()?;
        let stem = format!("{}_{}_{}", cfg.name, verb.name().replace('-', "_"), &hash[..8]);
        Ok(Context { cfg, hash, stem })
    }

    fn source(&self) -> Result<ResolvedSource> {
        self.cfg.resolve()
    }

    fn jsa(&self, src: &ResolvedSource) -> Result<JsaGrid> {
        build_jsa(&src.pump, &src.crystal, &src.grid, src.pmf)
    }

    fn decomposition(&self, src: &ResolvedSource) -> Result<SchmidtDecomposition> {
        schmidt_decompose(&self.jsa(src)?, self.cfg.schmidt.cutoff)
    }

    fn sidecar(&self, verb: Verb, units: serde_json::Value, files: &[String], summary: serde_json::Value) -> Vec<u8> {
        let meta = json!({
            "tool": "fockherald",
            "version": VERSION,
            "verb": verb.name(),
            "config_name": self.cfg.name,
            "config_sha256": self.hash,
            "units": units,
            "files": files,
            "summary": summary,
        });
        let mut s = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        s.push('\n');
        s.into_bytes()
    }
}

fn finish(
    ctx: &Context,
    verb: Verb,
    mut art: Artifact,
    units: serde_json::Value,
    summary: serde_json::Value,
) -> Artifact {
    let names: Vec<String> = art.files.iter().map(|(n, _)| n.clone()).collect();
    let side = ctx.sidecar(verb, units, &names, summary);
    art.files.push((format!("{}.json", ctx.stem), side));
    art
}

fn source_units() -> serde_json::Value {
    json!({ "omega": "rad/s", "mu_p": "rad/s", "sigma_p": "rad/s", "length": "m", "slowness": "s/m" })
}

fn source_summary(src: &ResolvedSource) -> serde_json::Value {
    json!({
        "mu_p": src.pump.mu_p,
        "sigma_p": src.pump.sigma_p,
        "length": src.crystal.length,
        "kp": src.crystal.kp,
        "ks": src.crystal.ks,
        "ki": src.crystal.ki,
        "grid_points": src.grid.n_points,
        "grid_span": src.grid.span,
        "grid_center": src.grid.center,
    })
}

pub fn cmd_jsa(cfg: RunConfig) -> Result<Artifact> {
    let ctx = Context::new(cfg, Verb::Jsa)?;
    let src = ctx.source()?;
    let jsa = ctx.jsa(&src)?;
    let mut grid = Csv::new(
        &ctx.hash,
        "|f| in s^(1/2) (grid-normalized); rows idler, columns signal",
        &[],
    );
    for i in 0..jsa.amplitude.nrows() {
        let row: Vec<String> = (0..jsa.amplitude.ncols())
            .map(|s| fmt_f64(jsa.amplitude[(i, s)].norm()))
            .collect();
        grid.row(&row);
    }
    let mut axes = Csv::new(&ctx.hash, "omega in rad/s", &["index", "omega_i", "omega_s"]);
    for j in 0..jsa.idler.len() {
        axes.row(&[
            j.to_string(),
            fmt_f64(jsa.idler.samples[j]),
            fmt_f64(jsa.signal.samples[j]),
        ]);
    }
    let mut art = Artifact::default();
    art.files.push((format!("{}.csv", ctx.stem), grid.into_bytes()));
    art.files.push((format!("{}_axes.csv", ctx.stem), axes.into_bytes()));
    art.summary.push(format!(
        "jsa {}: {}x{} grid, span {} rad/s, L = {} mm",
        ctx.cfg.name,
        jsa.idler.len(),
        jsa.signal.len(),
        human_sci(src.grid.span),
        human(src.crystal.length * 1e3)
    ));
    Ok(finish(&ctx, Verb::Jsa, art, source_units(), source_summary(&src)))
}

pub fn cmd_schmidt(cfg: RunConfig) -> Result<Artifact> {
    let ctx = Context::new(cfg, Verb::Schmidt)?;
    let src = ctx.source()?;
    let full = schmidt_decompose(&ctx.jsa(&src)?, 0.0)?;
    let cutoff = ctx.cfg.schmidt.cutoff;
    let retained = full.b.iter().filter(|b| **b >= cutoff).count();
    let e = full.entropy();
    let mut coeffs = Csv::new(&ctx.hash, "dimensionless", &["k", "b", "retained"]);
    for (k, b) in full.b.iter().enumerate() {
        coeffs.row(&[(k + 1).to_string(), fmt_f64(*b), (*b >= cutoff).to_string()]);
    }
    let m = ctx.cfg.schmidt.modes_out.min(full.len());
    let mut cols = vec!["index".to_string(), "omega_i".into(), "omega_s".into()];
    for k in 1..=m {
        cols.extend([
            format!("zeta{k}_re"),
            format!("zeta{k}_im"),
            format!("xi{k}_re"),
            format!("xi{k}_im"),
        ]);
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut modes = Csv::new(&ctx.hash, "omega in rad/s; modes in s^(1/2)", &col_refs);
    for j in 0..full.idler.len() {
        let mut row = vec![
            j.to_string(),
            fmt_f64(full.idler.samples[j]),
            fmt_f64(full.signal.samples[j]),
        ];
        for k in 0..m {
            let (z, x) = (full.zeta[(j, k)], full.xi[(j, k)]);
            row.extend([fmt_f64(z.re), fmt_f64(z.im), fmt_f64(x.re), fmt_f64(x.im)]);
        }
        modes.row(&row);
    }
    let mut art = Artifact::default();
    art.files.push((format!("{}.csv", ctx.stem), coeffs.into_bytes()));
    art.files.push((format!("{}_modes.csv", ctx.stem), modes.into_bytes()));
    art.summary.push(format!(
        "schmidt {}: E = {} bits, b_1 = {}, {} of {} modes at or above cutoff {}",
        ctx.cfg.name,
        human(e),
        human(full.b[0]),
        retained,
        full.total_modes,
        cutoff
    ));
    let summary = json!({
        "entropy_bits": e,
        "b1": full.b[0],
        "total_modes": full.total_modes,
        "retained_modes": retained,
        "cutoff": cutoff,
        "source": source_summary(&src),
    });
    Ok(finish(
        &ctx,
        Verb::Schmidt,
        art,
        json!({ "b": "dimensionless", "entropy": "bits", "omega": "rad/s" }),
        summary,
    ))
}

fn metric_row(chi: f64, r: &HeraldReport, outcome: &str) -> Vec<String> {
    vec![
        fmt_f64(chi),
        r.n.to_string(),
        fmt_f64(r.probability),
        fmt_opt(r.g2()),
        fmt_opt(r.purity()),
        fmt_opt(r.fidelity()),
        outcome.to_string(),
    ]
}

fn outcome_label(o: &SolveOutcome) -> &'static str {
    match o {
        SolveOutcome::Solved { .. } => "solved",
        SolveOutcome::Saturated { .. } => "saturated",
        SolveOutcome::ChiIndependent { feasible: true, .. } => "chi_independent",
        SolveOutcome::ChiIndependent { feasible: false, .. } => "unreachable",
        SolveOutcome::Unreachable { .. } => "unreachable",
    }
}

pub fn cmd_herald(cfg: RunConfig) -> Result<Artifact> {
    let ctx = Context::new(cfg, Verb::Herald)?;
    let h = ctx
        .cfg
        .herald
        .clone()
        .ok_or_else(|| Error::Config("herald verb needs a [herald] section".into()))?;
    let src = ctx.source()?;
    let decomp = ctx.decomposition(&src)?;
    let filter = ctx.cfg.filter_spec(src.grid.center)?;
    let model = HeraldModel::new(&decomp, &filter)?;
    let mut csv = Csv::new(
        &ctx.hash,
        "chi dimensionless; probability per pump pulse",
        &["chi", "n", "probability", "g2", "purity", "fidelity", "outcome"],
    );
    let mut art = Artifact::default();
    let mut summary = json!({ "n": h.n, "eta": filter.eta, "modes": decomp.len() });
    if let Some(chi) = &h.chi {
        for c in chi.values() {
            let r = model.report(c, h.n)?;
            csv.row(&metric_row(c, &r, "fixed"));
            art.summary.push(format!(
                "herald {} n={} chi={}: p = {}, g2 = {}, purity = {}, F = {}",
                ctx.cfg.name,
                h.n,
                human(c),
                human_sci(r.probability),
                r.g2().map(human).unwrap_or_else(|| "none".into()),
                r.purity().map(human).unwrap_or_else(|| "none".into()),
                r.fidelity().map(human).unwrap_or_else(|| "none".into()),
            ));
        }
    } else if let Some(target) = h.target_fidelity {
        let chi_max = ctx.cfg.herald_chi_max(h.n, h.chi_max);
        let (label, chi) = match solve_chi(&model, h.n, target, chi_max) {
            Ok(o) => (outcome_label(&o), o.chi_star(chi_max)),
            Err(Error::NonMonotone { .. }) => ("non_monotone", None),
            Err(Error::NotConverged(_)) => ("not_converged", None),
            Err(e) => return Err(e),
        };
        match chi {
            Some(c) => {
                let r = model.report(c, h.n)?;
                csv.row(&metric_row(c, &r, label));
                art.summary.push(format!(
                    "herald {} n={} F*={}: chi* = {}, p = {} ({label})",
                    ctx.cfg.name,
                    h.n,
                    target,
                    human(c),
                    human_sci(r.probability)
                ));
            }
            None => {
                let none = "none".to_string();
                csv.row(&[
                    none.clone(),
                    h.n.to_string(),
                    none.clone(),
                    none.clone(),
                    none.clone(),
                    none,
                    label.into(),
                ]);
                art.summary
                    .push(format!("herald {} n={} F*={}: {label}", ctx.cfg.name, h.n, target));
            }
        }
        summary["target_fidelity"] = json!(target);
        summary["outcome"] = json!(label);
    }
    art.files.push((format!("{}.csv", ctx.stem), csv.into_bytes()));
    Ok(finish(
        &ctx,
        Verb::Herald,
        art,
        json!({ "chi": "dimensionless", "probability": "per pulse" }),
        summary,
    ))
}

pub fn cmd_sweep(cfg: RunConfig) -> Result<Artifact> {
    let ctx = Context::new(cfg, Verb::Sweep)?;
    let sw = ctx
        .cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep verb needs a [sweep] section".into()))?;
    let src = ctx.source()?;
    let decomp = Arc::new(ctx.decomposition(&src)?);
    let mut filters: Vec<SweepFilter> = sw.sigma_f.iter().map(|s| SweepFilter::Gaussian(*s)).collect();
    if sw.include_delta {
        filters.push(SweepFilter::Delta);
    }
    if sw.include_none {
        filters.push(SweepFilter::None);
    }
    let req = SweepRequest {
        key: ctx.cfg.decomposition_key()?,
        decomposition: decomp.clone(),
        n: sw.n,
        eta: sw.eta,
        mu_f: sw.mu_f.unwrap_or(src.grid.center),
        filters,
        target: sw.target_fidelity,
        chi_max: ctx.cfg.herald_chi_max(sw.n, sw.chi_max),
    };
    let rows = sweep_filter_width(&req, &DesignCache::new())?;
    let mut csv = Csv::new(
        &ctx.hash,
        "sigma_f in rad/s; chi dimensionless; entropy in bits",
        &[
            "filter",
            "sigma_f",
            "chi_star",
            "probability",
            "fidelity",
            "entropy",
            "unreachable",
            "chi_independent",
            "saturated",
            "non_monotone",
            "not_converged",
        ],
    );
    for r in &rows {
        csv.row(&[
            r.filter.to_string(),
            fmt_opt(r.sigma_f),
            fmt_opt(r.chi_star),
            fmt_opt(r.probability),
            fmt_opt(r.fidelity),
            fmt_f64(r.entropy),
            r.flags.unreachable.to_string(),
            r.flags.chi_independent.to_string(),
            r.flags.saturated.to_string(),
            r.flags.non_monotone.to_string(),
            r.flags.not_converged.to_string(),
        ]);
    }
    let mut art = Artifact::default();
    let best = crate::design::best_row(&rows);
    art.summary.push(match best {
        Some(b) => format!(
            "sweep {} n={} eta={} F*={}: best p = {} with {} filter{}",
            ctx.cfg.name,
            sw.n,
            sw.eta,
            sw.target_fidelity,
            human_sci(b.probability.unwrap_or(0.0)),
            b.filter,
            b.sigma_f
                .map(|s| format!(" sigma_f = {}", human_sci(s)))
                .unwrap_or_default()
        ),
        None => format!("sweep {}: target unreachable for every filter", ctx.cfg.name),
    });
    art.files.push((format!("{}.csv", ctx.stem), csv.into_bytes()));
    let summary = json!({
        "n": sw.n,
        "eta": sw.eta,
        "target_fidelity": sw.target_fidelity,
        "chi_max": req.chi_max,
        "modes": decomp.len(),
        "best_probability": best.and_then(|b| b.probability),
        "best_filter": best.map(|b| b.filter),
        "best_sigma_f": best.and_then(|b| b.sigma_f),
    });
    Ok(finish(
        &ctx,
        Verb::Sweep,
        art,
        json!({ "sigma_f": "rad/s", "chi": "dimensionless" }),
        summary,
    ))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

pub fn cmd_surface(cfg: RunConfig) -> Result<Artifact> {
    let ctx = Context::new(cfg, Verb::Surface)?;
    let su = ctx
        .cfg
        .surface
        .clone()
        .ok_or_else(|| Error::Config("surface verb needs a [surface] section".into()))?;
    let src = ctx.source()?;
    let decomp = ctx.decomposition(&src)?;
    let filter = ctx.cfg.filter_spec(src.grid.center)?;
    let chi_max = ctx.cfg.herald_chi_max(su.n, su.chi_max);
    let chi = linspace(0.0, chi_max, su.chi_points);
    let eta = linspace(0.0, 1.0, su.eta_points);
    let cells = metric_surface(
        &chi,
        &eta,
        su.n,
        &ctx.cfg.decomposition_key()?,
        &decomp,
        &filter.kind,
        &DesignCache::new(),
    )?;
    let mut csv = Csv::new(
        &ctx.hash,
        "chi and eta dimensionless",
        &["chi", "eta", "probability", "g2", "purity", "fidelity"],
    );
    for c in &cells {
        csv.row(&[
            fmt_f64(c.chi),
            fmt_f64(c.eta),
            fmt_f64(c.probability),
            fmt_opt(c.g2),
            fmt_opt(c.purity),
            fmt_opt(c.fidelity),
        ]);
    }
    let mut art = Artifact::default();
    art.summary.push(format!(
        "surface {} n={}: {}x{} cells over chi in [0, {}], eta in [0, 1]",
        ctx.cfg.name, su.n, su.chi_points, su.eta_points, chi_max
    ));
    art.files.push((format!("{}.csv", ctx.stem), csv.into_bytes()));
    let summary = json!({ "n": su.n, "chi_max": chi_max, "chi_points": su.chi_points, "eta_points": su.eta_points, "modes": decomp.len() });
    Ok(finish(
        &ctx,
        Verb::Surface,
        art,
        json!({ "chi": "dimensionless", "eta": "dimensionless" }),
        summary,
    ))
}

#[derive(Serialize)]
struct OracleSummary {
    seed: u64,
    instances: usize,
    passed: usize,
    worst_rel_err: f64,
    rel_tol: f64,
}

pub fn cmd_oracle_check(cfg: RunConfig) -> Result<Artifact> {
    let ctx = Context::new(cfg, Verb::OracleCheck)?;
    let o = ctx.cfg.oracle.clone();
    let results = run_suite(o.seed, o.instances)?;
    let mut csv = Csv::new(
        &ctx.hash,
        "relative errors dimensionless",
        &[
            "index",
            "n",
            "filter",
            "eta",
            "chi",
            "bins",
            "modes",
            "max_rel_err",
            "pass",
        ],
    );
    let mut worst = 0.0f64;
    for r in &results {
        let err = r.metrics.iter().map(|m| m.rel_err).fold(0.0, f64::max);
        worst = worst.max(err);
        csv.row(&[
            r.index.to_string(),
            r.n.to_string(),
            r.filter.to_string(),
            fmt_f64(r.eta),
            fmt_f64(r.chi),
            r.bins.to_string(),
            r.modes.to_string(),
            fmt_f64(err),
            r.pass.to_string(),
        ]);
    }
    let passed = results.iter().filter(|r| r.pass).count();
    let mut art = Artifact {
        failures: results.len() - passed,
        ..Artifact::default()
    };
    art.summary.push(if art.failures == 0 {
        format!(
            "oracle-check: all pass ({passed}/{}), worst relative error {}",
            results.len(),
            human_sci(worst)
        )
    } else {
        format!("oracle-check: {} of {} instances FAIL", art.failures, results.len())
    });
    art.files.push((format!("{}.csv", ctx.stem), csv.into_bytes()));
    let summary = serde_json::to_value(OracleSummary {
        seed: o.seed,
        instances: results.len(),
        passed,
        worst_rel_err: worst,
        rel_tol: REL_TOL,
    })
    .expect("summary serializes");
    Ok(finish(
        &ctx,
        Verb::OracleCheck,
        art,
        json!({ "rel_err": "dimensionless" }),
        summary,
    ))
}

pub fn run_verb(verb: Verb, cfg: RunConfig) -> Result<Artifact> {
    match verb {
        Verb::Jsa => cmd_jsa(cfg),
        Verb::Schmidt => cmd_schmidt(cfg),
        Verb::Herald => cmd_herald(cfg),
        Verb::Sweep => cmd_sweep(cfg),
        Verb::Surface => cmd_surface(cfg),
        Verb::OracleCheck => cmd_oracle_check(cfg),
    }
}

/// Writes every file, refusing to replace differing content unless `force`.
pub fn write_artifact(art: &Artifact, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    if !force {
        for (name, bytes) in &art.files {
            let path = dir.join(name);
            if path.exists() && std::fs::read(&path)? != *bytes {
                return Err(Error::WouldOverwrite(path.display().to_string()));
            }
        }
    }
    let mut written = Vec::with_capacity(art.files.len());
    for (name, bytes) in &art.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Runs one invocation; the returned error carries the process exit code.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let art = run_verb(cli.verb, cfg)?;
    let written = write_artifact(&art, &cli.out, cli.force)?;
    for line in &art.summary {
        println!("{line}");
    }
    if art.failures > 0 {
        return Err(Error::OracleMismatch(art.failures));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.2e-4, -5.0e12, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn refuses_silent_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let mut art = Artifact::default();
        art.files.push(("a.csv".into(), b"1\n".to_vec()));
        write_artifact(&art, dir.path(), false).unwrap();
        write_artifact(&art, dir.path(), false).unwrap();
        art.files[0].1 = b"2\n".to_vec();
        let err = write_artifact(&art, dir.path(), false).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        write_artifact(&art, dir.path(), true).unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), b"2\n");
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 0.5, 6);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[5], 0.5);
    }
}
