//! Subcommand implementations. The `compute_*` functions are pure; the `run_*`
//! functions persist their results and return human-readable summary lines.

use std::f64::consts::PI;

use anyhow::Context as _;
use num_complex::Complex64;
use qcloak::radial::{default_l_max, RadialSystem};
use qcloak::scattering::{dn_spectrum, free_dn_spectrum, phase_shifts, plane_wave_field, total_cross_section, PhaseShifts};
use qcloak::spectral::{
    dirichlet_eigenvalues, resonance_scan, ModeKind, ResonanceOptions, ResonanceReport, ScanOptions, SpectralPoint,
};
use qcloak::synthesis::{gauge_potential, CorePotential, Layer, LayeredMedium, RadialPotential, OUTER_RADIUS};

use crate::config::{ExperimentConfig, GaugeKind, PresetKind, SolverMode};
use crate::guard::{self, NearestEigenvalue};
use crate::output::{num, RunDir};

/// One named form of the configured problem.
pub struct NamedSystem {
    pub name: &'static str,
    pub system: RadialSystem,
}

pub fn systems(cfg: &ExperimentConfig, medium: &LayeredMedium) -> qcloak::Result<Vec<NamedSystem>> {
    let mut out = Vec::new();
    if cfg.mode != SolverMode::Schrodinger {
        out.push(NamedSystem { name: "acoustic", system: medium.clone().into() });
    }
    if cfg.mode != SolverMode::Acoustic {
        let potential = gauge_potential(medium, cfg.energy, cfg.gauge_mode())?;
        out.push(NamedSystem { name: "schrodinger", system: potential.into() });
    }
    Ok(out)
}

/// Refuses energies next to an excluded eigenvalue unless `force` is set.
pub fn admit(cfg: &ExperimentConfig, force: bool) -> anyhow::Result<Vec<NearestEigenvalue>> {
    let nearest = guard::nearest_excluded(cfg.energy, &cfg.core_potential(), cfg.core_preset.into(), cfg.l_max)?;
    match guard::check(&nearest, cfg.energy, cfg.eigen_tolerance) {
        Ok(()) => Ok(nearest),
        Err(refusal) if force => {
            log::warn!("{refusal} (forced)");
            Ok(nearest)
        }
        Err(refusal) => Err(refusal.into()),
    }
}

fn nearest_lines(nearest: &[NearestEigenvalue]) -> Vec<String> {
    if nearest.is_empty() {
        return vec![format!("no excluded eigenvalue within {} of the energy", guard::SEARCH_RADIUS)];
    }
    nearest
        .iter()
        .map(|n| format!("nearest {} eigenvalue: E = {:.10} (l = {}), distance {:.3e}", n.spectrum, n.energy, n.l, n.distance))
        .collect()
}

pub struct Synthesis {
    pub medium: LayeredMedium,
    pub potential: RadialPotential,
}

pub fn compute_synthesis(cfg: &ExperimentConfig) -> qcloak::Result<Synthesis> {
    let medium = cfg.medium()?;
    let potential = gauge_potential(&medium, cfg.energy, cfg.gauge_mode())?;
    Ok(Synthesis { medium, potential })
}

pub fn run_synthesize(cfg: &ExperimentConfig, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let s = compute_synthesis(cfg)?;
    dir.write_artifact("medium.txt", &qcloak::io::write_layered(&s.medium))?;
    dir.write_artifact("potential.txt", &qcloak::io::write_potential(&s.potential))?;
    let rows = s.potential.shells().iter().map(|p| vec![num(p.r_in), num(p.r_out), num(p.v), num(p.gauge_sigma)]);
    dir.write_table("potential_profile.csv", &["r_in", "r_out", "v", "sigma"], rows)?;
    let v_max = s.potential.shells().iter().map(|p| p.v.abs()).fold(0.0, f64::max);
    Ok(vec![
        format!("{} medium shells, {} potential shells", s.medium.shells().len(), s.potential.shells().len()),
        format!("max |V| = {v_max:.6e}"),
    ])
}

pub struct ShiftTable {
    pub columns: Vec<(&'static str, PhaseShifts)>,
}

pub fn compute_phase_shifts(cfg: &ExperimentConfig) -> qcloak::Result<ShiftTable> {
    let medium = cfg.medium()?;
    let columns = systems(cfg, &medium)?
        .into_iter()
        .map(|s| Ok((s.name, phase_shifts(&s.system, cfg.energy, cfg.l_max)?)))
        .collect::<qcloak::Result<_>>()?;
    Ok(ShiftTable { columns })
}

pub fn run_phase_shifts(cfg: &ExperimentConfig, force: bool, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let nearest = admit(cfg, force)?;
    let table = compute_phase_shifts(cfg)?;
    let names: Vec<String> = table.columns.iter().map(|(n, _)| format!("delta_{n}")).collect();
    let mut header = vec!["l"];
    header.extend(names.iter().map(String::as_str));
    let n = table.columns[0].1.delta.len();
    let rows = (0..n).map(|l| {
        let mut row = vec![l.to_string()];
        row.extend(table.columns.iter().map(|(_, s)| num(s.delta[l])));
        row
    });
    dir.write_table("phase_shifts.csv", &header, rows)?;
    let mut lines = nearest_lines(&nearest);
    for (name, s) in &table.columns {
        lines.push(format!("{name}: sigma_tot = {:.6e}, max |delta| = {:.6e}", total_cross_section(s), max_abs(&s.delta)));
    }
    Ok(lines)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn run_dn_compare(cfg: &ExperimentConfig, force: bool, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let nearest = admit(cfg, force)?;
    let medium = cfg.medium()?;
    let l_max = cfg.l_max.unwrap_or_else(|| default_l_max(cfg.energy));
    let free = free_dn_spectrum(cfg.energy, l_max)?;
    let spectra = systems(cfg, &medium)?
        .into_iter()
        .map(|s| Ok((s.name, dn_spectrum(&s.system, cfg.energy, Some(l_max))?)))
        .collect::<qcloak::Result<Vec<_>>>()?;
    let mut header = vec!["l".to_string(), "lambda_free".to_string()];
    for (name, _) in &spectra {
        header.push(format!("lambda_{name}"));
        header.push(format!("deviation_{name}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..=l_max).map(|l| {
        let mut row = vec![l.to_string(), num(free.lambda[l])];
        for (_, s) in &spectra {
            row.push(num(s.lambda[l]));
            row.push(num(s.lambda[l] - free.lambda[l]));
        }
        row
    });
    dir.write_table("dn_compare.csv", &header, rows)?;
    let mut lines = nearest_lines(&nearest);
    for (name, s) in &spectra {
        lines.push(format!("{name}: max_l |lambda - lambda_free| = {:.6e}", s.max_deviation(&free)));
    }
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub radius: f64,
    pub n_layers: usize,
    pub anisotropy: f64,
    pub dn_deviation: f64,
    pub sigma_tot: f64,
}

pub fn compute_convergence(cfg: &ExperimentConfig) -> qcloak::Result<Vec<ConvergenceRow>> {
    let l_max = cfg.l_max.unwrap_or_else(|| default_l_max(cfg.energy));
    let free = free_dn_spectrum(cfg.energy, l_max)?;
    cfg.radii
        .iter()
        .map(|&radius| {
            let n_layers = cfg.layers_at(radius);
            let medium = cfg.medium_at(radius, n_layers)?;
            let system = systems(cfg, &medium)?.remove(0).system;
            let dn = dn_spectrum(&system, cfg.energy, Some(l_max))?;
            let shifts = phase_shifts(&system, cfg.energy, Some(l_max))?;
            Ok(ConvergenceRow {
                radius,
                n_layers,
                anisotropy: (radius / (radius - 1.0)).powi(2),
                dn_deviation: dn.max_deviation(&free),
                sigma_tot: total_cross_section(&shifts),
            })
        })
        .collect()
}

/// Both figures of merit strictly decrease along the rows.
pub fn strictly_decreasing(rows: &[ConvergenceRow]) -> bool {
    rows.windows(2).all(|w| w[1].dn_deviation < w[0].dn_deviation && w[1].sigma_tot < w[0].sigma_tot)
}

pub fn run_convergence(cfg: &ExperimentConfig, force: bool, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let nearest = admit(cfg, force)?;
    let rows = compute_convergence(cfg)?;
    dir.write_table(
        "convergence.csv",
        &["radius", "n_layers", "anisotropy", "max_dn_deviation", "sigma_tot"],
        rows.iter().map(|r| {
            vec![num(r.radius), r.n_layers.to_string(), num(r.anisotropy), num(r.dn_deviation), num(r.sigma_tot)]
        }),
    )?;
    let mut lines = nearest_lines(&nearest);
    for r in &rows {
        lines.push(format!(
            "R = {:<6} layers = {:<5} DN deviation = {:.4e}  sigma_tot = {:.4e}",
            r.radius, r.n_layers, r.dn_deviation, r.sigma_tot
        ));
    }
    let trend = if strictly_decreasing(&rows) { "decreasing" } else { "NOT decreasing" };
    lines.push(format!("trend: {trend}"));
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        lines.push(format!("sigma_tot reduction: {:.3e}x", first.sigma_tot / last.sigma_tot));
    }
    Ok(lines)
}

/// The three reproduction scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    PassThrough,
    DirichletTrap,
    NeumannTrap,
}

impl Scenario {
    pub fn c_inn(self) -> f64 {
        match self {
            Scenario::PassThrough => -98.5,
            Scenario::DirichletTrap => 1.858,
            Scenario::NeumannTrap => -71.45,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PassThrough => "pass-through",
            Scenario::DirichletTrap => "dirichlet-trap",
            Scenario::NeumannTrap => "neumann-trap",
        }
    }

    /// Scenario parameters layered over `base`; grids and tolerances are kept.
    pub fn config(self, base: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            truncation_radius: 1.005,
            n_layers: 50,
            core_layers: 20,
            core_preset: PresetKind::Doubled,
            energy: 0.5,
            c_inn: self.c_inn(),
            step_radius: 0.9,
            gauge: GaugeKind::Interface,
            ..base.clone()
        }
    }
}

/// Window searched for the core-concentrated Dirichlet mode.
pub const DIRICHLET_TRAP_WINDOW: (f64, f64) = (0.25, 0.75);

pub fn resonance_options(cfg: &ExperimentConfig) -> ResonanceOptions {
    ResonanceOptions {
        samples: cfg.scan_samples,
        threshold: cfg.amplification_threshold,
        ..ResonanceOptions::default()
    }
}

fn channels(cfg: &ExperimentConfig) -> Vec<usize> {
    let centre = 0.5 * (cfg.scan_window[0] + cfg.scan_window[1]);
    (0..=cfg.l_max.unwrap_or_else(|| default_l_max(centre))).collect()
}

pub fn compute_resonance(cfg: &ExperimentConfig, system: &RadialSystem) -> qcloak::Result<ResonanceReport> {
    let window = (cfg.scan_window[0], cfg.scan_window[1]);
    resonance_scan(system, &channels(cfg), window, &resonance_options(cfg))
}

/// Core-concentrated Dirichlet eigenvalues in the window, nearest to `target` first.
pub fn interior_modes(
    system: &RadialSystem,
    l_max: usize,
    window: (f64, f64),
    target: f64,
) -> qcloak::Result<Vec<SpectralPoint>> {
    let mut modes = Vec::new();
    for l in 0..=l_max {
        modes.extend(
            dirichlet_eigenvalues(system, l, window, &ScanOptions::default())?
                .into_iter()
                .filter(|p| p.kind == ModeKind::Interior),
        );
    }
    modes.sort_by(|a, b| (a.energy - target).abs().total_cmp(&(b.energy - target).abs()));
    Ok(modes)
}

/// Points `(x, 0, 0)` for `x` in `[0, 3]`.
pub fn segment_grid(n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|i| [OUTER_RADIUS * i as f64 / (n - 1) as f64, 0.0, 0.0]).collect()
}

/// The `y = 0` plane over `[-3, 3]^2`, row-major in `z` then `x`.
pub fn slice_grid(n: usize) -> Vec<[f64; 3]> {
    let coord = |i: usize| OUTER_RADIUS * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
    (0..n).flat_map(|iz| (0..n).map(move |ix| [coord(ix), 0.0, coord(iz)])).collect()
}

fn inside(p: &[f64; 3]) -> bool {
    p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= OUTER_RADIUS * OUTER_RADIUS
}

/// Total field on `points`; points outside the ball are `NaN`.
pub fn sample_field(system: &RadialSystem, energy: f64, points: &[[f64; 3]], l_max: Option<usize>) -> qcloak::Result<Vec<Complex64>> {
    let inner: Vec<[f64; 3]> = points.iter().copied().filter(inside).collect();
    let mut values = plane_wave_field(system, energy, &inner, l_max)?.into_iter();
    Ok(points
        .iter()
        .map(|p| if inside(p) { values.next().expect("one value per inner point") } else { Complex64::new(f64::NAN, f64::NAN) })
        .collect())
}

fn write_field(dir: &mut RunDir, name: &str, points: &[[f64; 3]], values: &[Complex64], plane: bool) -> anyhow::Result<()> {
    let columns: &[&str] = if plane { &["x", "z", "re", "im", "abs"] } else { &["x", "re", "im", "abs"] };
    let rows = points.iter().zip(values).map(|(p, v)| {
        let mut row = vec![num(p[0])];
        if plane {
            row.push(num(p[2]));
        }
        row.extend([num(v.re), num(v.im), num(v.norm())]);
        row
    });
    dir.write_table(name, columns, rows)?;
    Ok(())
}

/// Largest `|psi - e^{ikz}|` over segment points with `x >= from`.
pub fn plane_wave_deviation(points: &[[f64; 3]], values: &[Complex64], energy: f64, from: f64) -> f64 {
    let k = energy.sqrt();
    points
        .iter()
        .zip(values)
        .filter(|(p, _)| p[0] >= from)
        .map(|(p, v)| (v - Complex64::from_polar(1.0, k * p[2])).norm())
        .fold(0.0, f64::max)
}

pub fn run_field_map(cfg: &ExperimentConfig, force: bool, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let nearest = admit(cfg, force)?;
    let medium = cfg.medium()?;
    let segment = segment_grid(cfg.segment_points);
    let slice = slice_grid(cfg.slice_points);
    let mut lines = nearest_lines(&nearest);
    for s in systems(cfg, &medium)? {
        let on_segment = sample_field(&s.system, cfg.energy, &segment, cfg.l_max)?;
        write_field(dir, &format!("segment_{}.csv", s.name), &segment, &on_segment, false)?;
        let on_slice = sample_field(&s.system, cfg.energy, &slice, cfg.l_max)?;
        write_field(dir, &format!("slice_{}.csv", s.name), &slice, &on_slice, true)?;
        lines.push(format!(
            "{}: max |psi - e^(ikz)| for x >= 2: {:.4e}",
            s.name,
            plane_wave_deviation(&segment, &on_segment, cfg.energy, 2.0)
        ));
    }
    Ok(lines)
}

fn write_resonance(dir: &mut RunDir, report: &ResonanceReport) -> anyhow::Result<()> {
    let rows = report.samples.iter().map(|s| {
        vec![s.l.to_string(), num(s.energy), num(s.amplification), num(s.concentration)]
    });
    dir.write_table("resonance.csv", &["l", "energy", "amplification", "concentration"], rows)?;
    Ok(())
}

fn resonance_lines(report: &ResonanceReport, threshold: f64) -> Vec<String> {
    let mut lines = vec![format!(
        "peak amplification {:.4e} at E = {:.10} (l = {})",
        report.amplification, report.peak.energy, report.peak.l
    )];
    match (&report.fitted_pole, report.scaling_exponent) {
        (Some(p), exponent) => {
            lines.push(format!(
                "almost trapped state: pole E = {:.12} (l = {}), core concentration {:.4}",
                p.energy, p.l, p.concentration
            ));
            if let Some(e) = exponent {
                lines.push(format!("fitted amplification exponent {e:.4}"));
            }
        }
        (None, _) => lines.push(format!("no peak above threshold {threshold:e}")),
    }
    lines
}

/// Two uniform shells with `sigma = 1`, `a = 4`: the first Dirichlet
/// eigenvalue is `(pi/6)^2`.
pub fn toy_medium() -> LayeredMedium {
    LayeredMedium::new(
        vec![
            Layer { r_in: 0.0, r_out: 1.5, sigma: 1.0, a: 4.0 },
            Layer { r_in: 1.5, r_out: 3.0, sigma: 1.0, a: 4.0 },
        ],
        CorePotential::zero(),
    )
    .expect("valid toy")
}

pub const TOY_POLE: f64 = PI * PI / 36.0;

pub fn run_resonance_scan(cfg: &ExperimentConfig, toy: bool, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let system: RadialSystem = if toy { toy_medium().into() } else { cfg.medium()?.into() };
    let report = compute_resonance(cfg, &system)?;
    write_resonance(dir, &report)?;
    let mut lines = resonance_lines(&report, cfg.amplification_threshold);
    if toy {
        lines.push(format!("toy pole (pi/6)^2 = {TOY_POLE:.12}"));
    }
    Ok(lines)
}

fn write_mode(dir: &mut RunDir, system: &RadialSystem, pole: &SpectralPoint, points: usize) -> anyhow::Result<()> {
    let solution = system.solve(pole.l, pole.energy)?;
    let radii: Vec<f64> = (0..points).map(|i| OUTER_RADIUS * i as f64 / (points - 1) as f64).collect();
    let values: Vec<f64> = radii.iter().map(|&r| solution.value_at(r).0).collect();
    let scale = max_abs(&values).max(f64::MIN_POSITIVE);
    dir.write_table("mode.csv", &["r", "u"], radii.iter().zip(&values).map(|(&r, &v)| vec![num(r), num(v / scale)]))?;
    Ok(())
}

pub fn run_scenario(base: &ExperimentConfig, scenario: Scenario, force: bool, dir: &mut RunDir) -> anyhow::Result<Vec<String>> {
    let cfg = scenario.config(base);
    let nearest = admit(&cfg, force).with_context(|| format!("scenario {}", scenario.name()))?;
    let system: RadialSystem = cfg.medium()?.into();
    let mut lines = vec![format!("scenario {} (c_inn = {}, E = {})", scenario.name(), cfg.c_inn, cfg.energy)];
    lines.extend(nearest_lines(&nearest));

    let segment = segment_grid(cfg.segment_points);
    let on_segment = sample_field(&system, cfg.energy, &segment, cfg.l_max)?;
    write_field(dir, "segment.csv", &segment, &on_segment, false)?;
    let slice = slice_grid(cfg.slice_points);
    let on_slice = sample_field(&system, cfg.energy, &slice, cfg.l_max)?;
    write_field(dir, "slice.csv", &slice, &on_slice, true)?;
    let core_peak = segment.iter().zip(&on_segment).filter(|(p, _)| p[0] < 0.9).map(|(_, v)| v.norm()).fold(0.0, f64::max);
    lines.push(format!(
        "max |psi - e^(ikz)| for x >= 2: {:.4e}; max |psi| for x < 0.9: {:.4e}",
        plane_wave_deviation(&segment, &on_segment, cfg.energy, 2.0),
        core_peak
    ));

    match scenario {
        Scenario::PassThrough | Scenario::NeumannTrap => {
            let report = compute_resonance(&cfg, &system)?;
            write_resonance(dir, &report)?;
            lines.extend(resonance_lines(&report, cfg.amplification_threshold));
            if let Some(pole) = &report.fitted_pole {
                write_mode(dir, &system, pole, cfg.segment_points)?;
            }
            let verdict = if report.fitted_pole.is_some() { "trapped" } else { "no trapped state" };
            lines.push(format!("verdict: {verdict}"));
        }
        Scenario::DirichletTrap => {
            let l_max = cfg.l_max.unwrap_or_else(|| default_l_max(cfg.energy));
            let modes = interior_modes(&system, l_max, DIRICHLET_TRAP_WINDOW, cfg.energy)?;
            dir.write_table(
                "eigenvalues.csv",
                &["l", "energy", "concentration", "borderline"],
                modes.iter().map(|p| vec![p.l.to_string(), num(p.energy), num(p.concentration), p.borderline.to_string()]),
            )?;
            match modes.first() {
                Some(mode) => {
                    write_mode(dir, &system, mode, cfg.segment_points)?;
                    lines.push(format!(
                        "core-concentrated Dirichlet eigenvalue nearest {}: E = {:.12} (l = {}), concentration {:.4}",
                        cfg.energy, mode.energy, mode.l, mode.concentration
                    ));
                    lines.push("verdict: trapped".into());
                }
                None => lines.push(format!(
                    "verdict: no core-concentrated Dirichlet eigenvalue in [{}, {}]",
                    DIRICHLET_TRAP_WINDOW.0, DIRICHLET_TRAP_WINDOW.1
                )),
            }
        }
    }
    let report: String = lines.iter().map(|l| format!("{l}\n")).collect();
    dir.write_artifact("report.txt", &report)?;
    Ok(lines)
}
