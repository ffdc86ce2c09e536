//! Configuration-driven experiment runner: time evolution with optional
//! projection, or a static area-accuracy study, writing plain-text artifacts.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::areafn::{areas_at_levels, restrict, AreaConfig};
use crate::contour::{contour_lines, svg_plot};
use crate::diagnostics::{
    self, l2_interior, max_diff, reference_liouville, secondary_peak, spurious_maximum,
    DiagnosticsRecord, ISOLATION, SPURIOUS_RADIUS,
};
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, Analytic, Grid, ScalarField};
use crate::schemes::{run_with, JacobianKind, Mode, Projection, SchemeConfig, Stepper};

/// Names of the compiled-in presets.
pub const PRESETS: [&str; 5] = [
    "paper-fig3a",
    "paper-fig3b",
    "paper-fig3c",
    "paper-fig3d",
    "disc-area-test",
];

const FIG3_COMMON: &str = r#"
[grid]
n = 20

[initial]
kind = "gaussian"
amp = 1.0
x0 = 0.75
y0 = 0.5
ax = 45.0
ay = 15.0

[mode]
kind = "liouville"

[mode.stream]
kind = "sin-stream"
amp = 1.0

[area]
budget = 200
richardson = true

[output]
snapshot_every = 100
levels = [-0.6, -0.4, -0.2, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
"#;

/// Text of a compiled-in preset.
pub fn preset_text(name: &str) -> Option<String> {
    let (scheme, projection) = match name {
        "paper-fig3a" => ("arakawa", "kind = \"none\""),
        "paper-fig3b" => ("arakawa", "kind = \"rearrange\"\ninterval = 20"),
        "paper-fig3c" => ("central", "kind = \"relabel\"\ninterval = 10"),
        "paper-fig3d" => ("arakawa", "kind = \"relabel\"\ninterval = 10"),
        "disc-area-test" => {
            return Some(
                r#"name = "disc-area-test"
kind = "area-accuracy"

[initial]
kind = "paraboloid"
scale = 1.0
x0 = 0.5
y0 = 0.5

[accuracy]
grids = [21, 41, 81]
levels = 20
deepest = -0.2
"#
                .to_string(),
            )
        }
        _ => return None,
    };
    Some(format!(
        "name = \"{name}\"\n\n[scheme]\njacobian = \"{scheme}\"\ndt = 0.003\nsteps = 400\n\n[projection]\n{projection}\n{FIG3_COMMON}"
    ))
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset '{name}' (known: {})",
            PRESETS.join(", ")
        ))
    })?;
    ExperimentConfig::parse(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Evolve,
    AreaAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub jacobian: String,
    pub dt: f64,
    pub steps: usize,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            jacobian: "arakawa".into(),
            dt: 0.003,
            steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeSection {
    Liouville { stream: Analytic },
    Euler,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection::Liouville {
            stream: Analytic::CELL_STREAM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionKind {
    #[default]
    None,
    Rearrange,
    Relabel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub kind: ProjectionKind,
    pub interval: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaSection {
    pub budget: usize,
    pub richardson: bool,
}

impl Default for AreaSection {
    fn default() -> Self {
        let d = AreaConfig::default();
        Self {
            budget: d.budget,
            richardson: d.richardson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub snapshot_every: usize,
    pub levels: Vec<f64>,
    pub dir: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            snapshot_every: 100,
            levels: (1..=9).map(|k| k as f64 / 10.0).collect(),
            dir: None,
        }
    }
}

/// Settings for the area-accuracy study on a paraboloid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracySection {
    pub grids: Vec<usize>,
    /// Number of levels, evenly spaced in `[deepest, 0)`.
    pub levels: usize,
    pub deepest: f64,
}

impl Default for AccuracySection {
    fn default() -> Self {
        Self {
            grids: vec![21, 41, 81],
            levels: 20,
            deepest: -0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub grid: GridSection,
    pub scheme: SchemeSection,
    pub mode: ModeSection,
    pub initial: Analytic,
    pub projection: ProjectionSection,
    pub area: AreaSection,
    pub output: OutputSection,
    pub accuracy: AccuracySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            kind: ExperimentKind::default(),
            grid: GridSection::default(),
            scheme: SchemeSection::default(),
            mode: ModeSection::default(),
            initial: Analytic::BLOB,
            projection: ProjectionSection::default(),
            area: AreaSection::default(),
            output: OutputSection::default(),
            accuracy: AccuracySection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates the sectioned `key = value` text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        if self.output.levels.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("contour levels must be finite".into()));
        }
        match self.kind {
            ExperimentKind::Evolve => {
                Grid::square(self.grid.n)?;
                self.scheme_config()?;
                self.projection()?;
                if self.scheme.steps == 0 {
                    return Err(Error::Config("steps must be at least 1".into()));
                }
                if self.output.snapshot_every == 0 {
                    return Err(Error::Config("snapshot_every must be at least 1".into()));
                }
            }
            ExperimentKind::AreaAccuracy => {
                let acc = &self.accuracy;
                if acc.grids.len() < 2 {
                    return Err(Error::Config("accuracy needs at least two grids".into()));
                }
                for &n in &acc.grids {
                    Grid::square(n)?;
                }
                if acc.levels == 0 || !(acc.deepest < 0.0 && acc.deepest.is_finite()) {
                    return Err(Error::Config(
                        "accuracy needs levels >= 1 and a negative finite deepest level".into(),
                    ));
                }
                if !matches!(self.initial, Analytic::Paraboloid { .. }) {
                    return Err(Error::Config(
                        "area accuracy is measured on a paraboloid initial field".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn area_config(&self) -> Result<AreaConfig> {
        let cfg = AreaConfig {
            budget: self.area.budget,
            richardson: self.area.richardson,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        let jacobian: JacobianKind = self.scheme.jacobian.parse()?;
        let mode = match self.mode {
            ModeSection::Liouville { stream } => Mode::Liouville(stream),
            ModeSection::Euler => Mode::Euler,
        };
        SchemeConfig::new(jacobian, self.scheme.dt, mode)
    }

    pub fn projection(&self) -> Result<Projection> {
        let interval = || {
            self.projection.interval.filter(|&n| n > 0).ok_or_else(|| {
                Error::Config("projection interval must be given and at least 1".into())
            })
        };
        Ok(match self.projection.kind {
            ProjectionKind::None => Projection::None,
            ProjectionKind::Rearrange => Projection::CellRearrange(interval()?),
            ProjectionKind::Relabel => Projection::Relabel(interval()?, self.area_config()?),
        })
    }
}

/// Headline numbers of one run, also written to `summary.txt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub name: String,
    pub entries: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl RunSummary {
    fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("name={}\n", self.name);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning={w}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = RunSummary::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Input(format!("bad summary line '{line}'")))?;
            match k {
                "name" => out.name = v.to_string(),
                "warning" => out.warnings.push(v.to_string()),
                _ => out.push(k, v),
            }
        }
        Ok(out)
    }
}

fn snapshot_name(step: usize) -> String {
    format!("field_{step:06}.txt")
}

fn write_contours(field: &ScalarField, levels: &[f64], path: &Path) -> Result<()> {
    let mut s = String::from("# level closed x0 y0 x1 y1 ...\n");
    for &c in levels {
        for line in contour_lines(field, c) {
            let _ = write!(s, "{} {}", fmt_f64(c), u8::from(line.closed));
            for (x, y) in &line.points {
                let _ = write!(s, " {} {}", fmt_f64(*x), fmt_f64(*y));
            }
            s.push('\n');
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Runs `cfg`, writing every artifact under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.toml"), cfg.to_text())?;
    let summary = match cfg.kind {
        ExperimentKind::Evolve => run_evolve(cfg, out_dir)?,
        ExperimentKind::AreaAccuracy => run_area_accuracy(cfg, out_dir)?,
    };
    fs::write(out_dir.join("summary.txt"), summary.to_text())?;
    Ok(summary)
}

/// Largest speed at the vertices for the initial state.
fn max_speed(stepper: &Stepper, omega0: &ScalarField) -> Result<f64> {
    let psi = stepper.stream_function(omega0)?;
    let g = psi.grid();
    let mut vmax: f64 = 0.0;
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            let u = (psi.at(i, j + 1) - psi.at(i, j - 1)) / (2.0 * g.hy());
            let v = -(psi.at(i + 1, j) - psi.at(i - 1, j)) / (2.0 * g.hx());
            vmax = vmax.max(u.hypot(v));
        }
    }
    Ok(vmax)
}

fn run_evolve(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let grid = Grid::square(cfg.grid.n)?;
    let scheme = cfg.scheme_config()?;
    let projection = cfg.projection()?;
    let area_cfg = cfg.area_config()?;
    let steps = cfg.scheme.steps;
    let every = cfg.output.snapshot_every;
    let levels = &cfg.output.levels;

    let omega0 = ScalarField::sample(grid, &cfg.initial, true)?;
    let stepper = Stepper::new(grid, scheme)?;
    let a0 = area_cfg.tabulate(&omega0);
    a0.write_csv(&out.join("area_t0.csv"))?;

    let mut summary = RunSummary {
        name: cfg.name.clone(),
        ..Default::default()
    };
    if let Projection::CellRearrange(nr) = projection {
        let travel = max_speed(&stepper, &omega0)? * nr as f64 * scheme.dt;
        if travel < 2.0 * grid.h() {
            let msg = format!(
                "rearrangement interval {nr} moves the flow only {travel:.3e}, under two cells ({:.3e}); values can get stuck",
                2.0 * grid.h()
            );
            eprintln!("warning: {msg}");
            summary.warnings.push(msg);
        }
    }

    let mut records = Vec::new();
    let final_omega = run_with(&omega0, &scheme, steps, &projection, |k, t, w| {
        if k % every != 0 && k != steps {
            return Ok(());
        }
        w.write_snapshot(&out.join(snapshot_name(k)))?;
        let psi = stepper.stream_function(w)?;
        let mut rec = diagnostics::record(w, &psi, &a0, &area_cfg, t)?;
        if let Mode::Liouville(stream) = scheme.mode {
            let exact = reference_liouville(&cfg.initial, &stream, grid, t)?;
            rec = rec.with_reference(w, &exact)?;
        }
        records.push(rec);
        write_contours(w, levels, &out.join(format!("contours_{k:06}.txt")))?;
        fs::write(
            out.join(format!("plot_{k:06}.svg")),
            svg_plot(w, levels, &format!("{}  t = {t:.3}", cfg.name)),
        )?;
        Ok(())
    })?;
    fs::write(
        out.join("diagnostics.csv"),
        diagnostics::write_csv(&records),
    )?;
    area_cfg
        .tabulate(&final_omega)
        .write_csv(&out.join("area_final.csv"))?;

    // The spurious feature is located in the unprojected run and followed
    // there in this one.
    let unprojected = if projection == Projection::None {
        final_omega.clone()
    } else {
        run_with(&omega0, &scheme, steps, &Projection::None, |_, _, _| Ok(()))?
    };
    let last = records.last().expect("final step is always recorded");
    summary.push("steps", steps);
    summary.push_f64("t_final", last.t);
    summary.push_f64("initial_max", omega0.max());
    summary.push_f64("max", final_omega.max());
    summary.push_f64("min", final_omega.min());
    summary.push_f64("peak_decay", final_omega.max() / omega0.max());
    summary.push_f64(
        "secondary_max",
        diagnostics::secondary_maximum(&final_omega, ISOLATION),
    );
    if let Some(p) = secondary_peak(&unprojected, ISOLATION) {
        let site = (p.index % grid.nx(), p.index / grid.nx());
        summary.push("spurious_site", format!("{} {}", site.0, site.1));
        summary.push_f64(
            "spurious_max",
            spurious_maximum(&final_omega, site, SPURIOUS_RADIUS),
        );
    }
    summary.push_f64("area_defect", last.area_defect);
    if let Some(e) = last.l2_err {
        summary.push_f64("l2_err", e);
    }
    Ok(summary)
}

/// Area of `{-scale r^2 >= c}` for a level whose disc stays inside the domain.
fn disc_area(scale: f64, c: f64) -> f64 {
    std::f64::consts::PI * (-c) / scale
}

/// One row of the area-accuracy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow {
    pub n: usize,
    pub h: f64,
    pub err_linear: f64,
    pub err_extrapolated: f64,
}

/// Max-over-levels area errors of the piecewise-linear and the extrapolated
/// estimates for `-scale r^2` on each grid.
pub fn area_accuracy(
    field: &Analytic,
    grids: &[usize],
    levels: &[f64],
) -> Result<Vec<AccuracyRow>> {
    let scale = match *field {
        Analytic::Paraboloid { scale, .. } => scale,
        _ => {
            return Err(Error::Config(
                "area accuracy needs a paraboloid field".into(),
            ))
        }
    };
    let exact: Vec<f64> = levels.iter().map(|&c| disc_area(scale, c)).collect();
    let mut rows = Vec::new();
    for &n in grids {
        let grid = Grid::square(n)?;
        let fine = ScalarField::sample(grid, field, false)?;
        let coarse = restrict(&fine);
        let r2 = (coarse.grid().hx() * coarse.grid().hy()) / grid.cell_area();
        let af = areas_at_levels(&fine, levels);
        let ac = areas_at_levels(&coarse, levels);
        let mut err_linear: f64 = 0.0;
        let mut err_extrapolated: f64 = 0.0;
        for k in 0..levels.len() {
            let ext = (r2 * af[k] - ac[k]) / (r2 - 1.0);
            err_linear = err_linear.max((af[k] - exact[k]).abs());
            err_extrapolated = err_extrapolated.max((ext - exact[k]).abs());
        }
        rows.push(AccuracyRow {
            n,
            h: grid.h(),
            err_linear,
            err_extrapolated,
        });
    }
    Ok(rows)
}

/// Observed convergence orders between consecutive rows.
pub fn observed_orders(rows: &[AccuracyRow]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| (w[0].err_linear / w[1].err_linear).ln() / (w[0].h / w[1].h).ln())
        .collect()
}

fn run_area_accuracy(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let acc = &cfg.accuracy;
    let levels: Vec<f64> = (1..=acc.levels)
        .map(|k| acc.deepest * k as f64 / acc.levels as f64)
        .collect();
    let rows = area_accuracy(&cfg.initial, &acc.grids, &levels)?;
    let mut csv = String::from("n,h,err_linear,err_extrapolated\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.n,
            fmt_f64(r.h),
            fmt_f64(r.err_linear),
            fmt_f64(r.err_extrapolated)
        );
    }
    fs::write(out.join("area_accuracy.csv"), csv)?;

    let finest = *acc.grids.iter().max().expect("validated non-empty");
    let field = ScalarField::sample(Grid::square(finest)?, &cfg.initial, false)?;
    let area_cfg = cfg.area_config()?;
    area_cfg
        .tabulate(&field)
        .write_csv(&out.join("area_t0.csv"))?;
    fs::write(
        out.join("plot_000000.svg"),
        svg_plot(&field, &levels, &cfg.name),
    )?;

    let mut summary = RunSummary {
        name: cfg.name.clone(),
        ..Default::default()
    };
    for (k, p) in observed_orders(&rows).iter().enumerate() {
        summary.push_f64(&format!("order_{}_{}", rows[k].n, rows[k + 1].n), *p);
    }
    for r in &rows {
        summary.push_f64(
            &format!("extrapolation_gain_{}", r.n),
            r.err_linear / r.err_extrapolated,
        );
    }
    Ok(summary)
}

/// Field and area-defect differences between two output directories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareReport {
    /// `(step, max-norm difference, interior L2 difference)` per common snapshot.
    pub fields: Vec<(usize, f64, f64)>,
    /// `(t, defect in A, defect in B)` per common diagnostics time.
    pub defects: Vec<(f64, f64, f64)>,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "step,max_diff,l2_diff")?;
        for (k, m, l) in &self.fields {
            writeln!(f, "{k},{},{}", fmt_f64(*m), fmt_f64(*l))?;
        }
        writeln!(f)?;
        writeln!(f, "t,area_defect_a,area_defect_b")?;
        for (t, a, b) in &self.defects {
            writeln!(f, "{},{},{}", fmt_f64(*t), fmt_f64(*a), fmt_f64(*b))?;
        }
        Ok(())
    }
}

fn snapshot_steps(dir: &Path) -> Result<Vec<usize>> {
    let mut steps = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(num) = name
            .strip_prefix("field_")
            .and_then(|r| r.strip_suffix(".txt"))
        {
            if let Ok(k) = num.parse::<usize>() {
                steps.push(k);
            }
        }
    }
    steps.sort_unstable();
    Ok(steps)
}

fn read_diagnostics(dir: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let path = dir.join("diagnostics.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    diagnostics::parse_csv(&fs::read_to_string(&path)?).map_err(|e| Error::Parse {
        path,
        reason: e.to_string(),
    })
}

pub fn compare(a: &Path, b: &Path) -> Result<CompareReport> {
    let (sa, sb) = (snapshot_steps(a)?, snapshot_steps(b)?);
    let common: Vec<usize> = sa.iter().copied().filter(|k| sb.contains(k)).collect();
    if common.is_empty() {
        return Err(Error::Input(format!(
            "no common snapshots in {} and {}",
            a.display(),
            b.display()
        )));
    }
    let mut report = CompareReport::default();
    for k in common {
        let fa = ScalarField::read_snapshot(&a.join(snapshot_name(k)))?;
        let fb = ScalarField::read_snapshot(&b.join(snapshot_name(k)))?;
        report
            .fields
            .push((k, max_diff(&fa, &fb)?, l2_interior(&fa, &fb)?));
    }
    let (da, db) = (read_diagnostics(a)?, read_diagnostics(b)?);
    for ra in &da {
        if let Some(rb) = db.iter().find(|r| (r.t - ra.t).abs() <= 1e-12) {
            report.defects.push((ra.t, ra.area_defect, rb.area_defect));
        }
    }
    Ok(report)
}
