//! One function per subcommand; each turns a validated config into artifacts.

use mincurv_core::continuation::{asymptotic_large, asymptotic_small, wishbone, AsymptoticReport, Band, LimitProfile};
use mincurv_core::periodic::{find_two_solutions, scan_with_seeds, segment_determinants, verify_orbit, Verification};
use mincurv_core::spectrum::{higher_eigenvalues, linearize_around, principal_eigenvalue, rotation_gap, SturmLiouvilleCoeffs};
use mincurv_core::subharmonic::{find_subharmonic, smallest_twist_order, twist_check, TwistReport};
use mincurv_core::{Error, PeriodicOrbit, Problem};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{FamilyKind, RunConfig, SpectrumSource};
use crate::output::{num, opt, Artifacts, Csv};
use crate::CliError;

fn orbit_csv(o: &PeriodicOrbit) -> Csv {
    let mut c = Csv::new(&["t", "u", "u_prime", "x2"]);
    for s in &o.samples {
        c.row(&[s.t, s.u(), s.u_prime(), s.x2]);
    }
    c
}

/// Label by position in the sup-norm ordering: with two or more orbits the
/// lowest is the small one and the highest the large one.
fn family_label(i: usize, n: usize, o: &PeriodicOrbit) -> String {
    match (n >= 2, i) {
        (true, 0) => "small".into(),
        (true, i) if i + 1 == n => "large".into(),
        (true, _) => "intermediate".into(),
        (false, _) => o.class.as_str().to_lowercase(),
    }
}

fn pick(orbits: &[PeriodicOrbit], family: FamilyKind, lambda: f64) -> Result<PeriodicOrbit, CliError> {
    let o = match family {
        FamilyKind::Small => orbits.first(),
        FamilyKind::Large if orbits.len() >= 2 => orbits.last(),
        FamilyKind::Large => None,
    };
    o.cloned().ok_or_else(|| CliError::Check {
        message: format!("no {family:?} orbit found at lambda = {lambda}").to_lowercase(),
        detail: json!({ "lambda": lambda, "orbits_found": orbits.len() }),
    })
}

#[derive(Serialize)]
struct VerificationRecord {
    integral_ag: f64,
    identity: f64,
    min_u: f64,
    max_abs_u_prime: f64,
    second_derivative: f64,
    det_max_deviation: f64,
    tolerance: f64,
    passed: bool,
}

fn check(o: &PeriodicOrbit, p: &Problem, cfg: &RunConfig) -> Result<VerificationRecord, CliError> {
    let tol = cfg.verify.tolerance;
    let (v, passed) = match verify_orbit(o, p, tol) {
        Ok(v) => (v, true),
        Err(Error::VerificationFailed { .. }) => (mincurv_core::periodic::check_trajectory(&o.trajectory, p, o.k, tol), false),
        Err(e) => return Err(e.into()),
    };
    let det = segment_determinants(p, o, &cfg.shooting())?.iter().fold(0.0f64, |m, d| m.max((d - 1.0).abs()));
    let Verification { integral_ag, identity, min_u, max_abs_u_prime, second_derivative, .. } = v;
    Ok(VerificationRecord {
        integral_ag,
        identity,
        min_u,
        max_abs_u_prime,
        second_derivative,
        det_max_deviation: det,
        tolerance: tol,
        passed: passed && det <= cfg.verify.det_tolerance,
    })
}

#[derive(Serialize)]
struct OrbitSummary {
    family: String,
    class: &'static str,
    file: String,
    sup_norm: f64,
    min_u: f64,
    max_abs_u_prime: f64,
    residual: f64,
    x0: [f64; 2],
    newton_iterations: usize,
    verification: VerificationRecord,
}

fn failed_checks(records: &[OrbitSummary]) -> Option<CliError> {
    let bad: Vec<&str> = records.iter().filter(|r| !r.verification.passed).map(|r| r.file.as_str()).collect();
    (!bad.is_empty()).then(|| CliError::Check {
        message: format!("verification failed for {}", bad.join(", ")),
        detail: json!({ "failed": bad }),
    })
}

fn summarize(orbits: &[PeriodicOrbit], p: &Problem, cfg: &RunConfig) -> Result<Vec<OrbitSummary>, CliError> {
    let mut records = Vec::with_capacity(orbits.len());
    for (i, o) in orbits.iter().enumerate() {
        let family = family_label(i, orbits.len(), o);
        let file = format!("orbit_{i}_{family}.csv");
        records.push(OrbitSummary {
            family,
            class: o.class.as_str(),
            file,
            sup_norm: o.sup_norm,
            min_u: o.min_value,
            max_abs_u_prime: o.max_abs_u_prime,
            residual: o.residual,
            x0: o.initial.to_array(),
            newton_iterations: o.iterations,
            verification: check(o, p, cfg)?,
        });
    }
    Ok(records)
}

pub fn solve(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.problem()?;
    let orbits = find_two_solutions(&p, &cfg.window(), &cfg.shooting())?;
    let records = summarize(&orbits, &p, cfg)?;
    let mut out = Artifacts::default();
    for (o, r) in orbits.iter().zip(&records) {
        out.csv(r.file.clone(), orbit_csv(o));
    }
    let rho_star = p.thresholds().ok().map(|c| c.rho_star);
    let failure = failed_checks(&records);
    out.json("solve.json", &json!({ "lambda": p.lambda, "k": 1, "rho_star": rho_star, "count": records.len(), "orbits": records }))?;
    finish(out, failure)
}

pub fn verify(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.problem()?;
    let orbits = find_two_solutions(&p, &cfg.window(), &cfg.shooting())?;
    let records = summarize(&orbits, &p, cfg)?;
    let failure = failed_checks(&records);
    let passed = failure.is_none();
    let mut out = Artifacts::default();
    out.json("verify.json", &json!({ "lambda": p.lambda, "passed": passed, "orbits": records }))?;
    finish(out, failure)
}

/// Artifacts are written either way; a failed check still exits 3.
fn finish(out: Artifacts, failure: Option<CliError>) -> Result<Artifacts, CliError> {
    match failure {
        None => Ok(out),
        Some(e) => Err(CliError::WithArtifacts { artifacts: out, source: Box::new(e) }),
    }
}

pub fn scan(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.problem()?;
    let grid = cfg.scan.grid();
    let (window, shooting) = (cfg.window(), cfg.shooting());
    let seeded = grid
        .par_iter()
        .map(|&l| find_two_solutions(&p.with_lambda(l), &window, &shooting))
        .collect::<Result<Vec<_>, _>>()?;
    let report = scan_with_seeds(&p, &grid, seeded, &shooting)?;
    let mut csv = Csv::new(&["lambda", "count", "index", "class", "sup_norm"]);
    for r in &report.rows {
        if r.count() == 0 {
            csv.row_str([num(r.lambda), "0".into(), String::new(), "none".into(), String::new()]);
        }
        for (i, (s, c)) in r.sup_norms.iter().zip(&r.classes).enumerate() {
            csv.row_str([num(r.lambda), r.count().to_string(), i.to_string(), c.as_str().into(), num(*s)]);
        }
    }
    let mut out = Artifacts::default();
    out.csv("scan.csv", csv);
    out.json(
        "scan.json",
        &json!({
            "grid_points": grid.len(),
            "onset": report.onset,
            "onset_bracket": report.onset_bracket,
            "largest_empty": report.largest_empty,
            "nonexistence_probe": report.onset.map(|l| 0.1 * l),
        }),
    )?;
    Ok(out)
}

pub fn branch(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.problem()?;
    let orbits = find_two_solutions(&p, &cfg.window(), &cfg.shooting())?;
    let start = pick(&orbits, cfg.branch.start_family, p.lambda)?;
    let b = wishbone(&p, &start, &cfg.branch_config())?;
    let mut csv = Csv::new(&["lambda", "x1_0", "x2_0", "sup_norm", "class", "fold_flag"]);
    for pt in &b.points {
        csv.row_str([num(pt.lambda), num(pt.x0[0]), num(pt.x0[1]), num(pt.sup_norm), pt.class.as_str().into(), u8::from(pt.fold).to_string()]);
    }
    let mut out = Artifacts::default();
    out.csv("branch.csv", csv);
    out.json(
        "branch.json",
        &json!({
            "start_lambda": p.lambda,
            "start_sup_norm": start.sup_norm,
            "points": b.points.len(),
            "folds": b.folds.iter().map(|f| json!({ "lambda": f.lambda, "x0": f.x0 })).collect::<Vec<_>>(),
            "termination": format!("{:?}", b.termination),
            "reverified": b.reverified,
            "step_bound": b.step_bound,
            "max_gap": b.max_gap(),
        }),
    )?;
    Ok(out)
}

fn band_name(b: Option<Band>) -> &'static str {
    match b {
        Some(Band::Down) => "down",
        Some(Band::Flat) => "flat",
        Some(Band::Up) => "up",
        None => "transition",
    }
}

fn limit_json(l: &LimitProfile, cfg: &RunConfig) -> serde_json::Value {
    let seg = |s: &mincurv_core::continuation::Segment| {
        json!({ "t_start": s.t_start, "t_end": s.t_end, "band": band_name(s.band), "min_u": s.min_u, "max_u": s.max_u })
    };
    let flat = l.flat_segments(cfg.asymptotic.flat_height_fraction);
    let plateau = match cfg.asymptotic.plateau_t.as_slice() {
        [a, b] => json!({ "interval": [a, b], "covered_fraction": LimitProfile::covered(&flat, *a, *b) / (b - a) }),
        _ => serde_json::Value::Null,
    };
    json!({
        "lambda": l.lambda,
        "coverage": l.coverage,
        "segments": l.segments.iter().map(seg).collect::<Vec<_>>(),
        "flat_at_positive_height": flat.iter().map(seg).collect::<Vec<_>>(),
        "plateau": plateau,
    })
}

pub fn asymptotic(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.problem()?;
    let a = &cfg.asymptotic;
    let acfg = cfg.asymptotic_config();
    let report: AsymptoticReport = match a.family {
        FamilyKind::Small => asymptotic_small(&p, &a.schedule, &acfg)?,
        FamilyKind::Large => asymptotic_large(&p, &a.schedule, &acfg)?,
    };
    let mut csv = Csv::new(&["lambda", "sup_norm", "scaled_norm", "band_fraction_0", "band_fraction_pm1", "w11_distance"]);
    for e in &report.entries {
        csv.row_str([num(e.lambda), num(e.sup_norm), num(e.scaled_norm), num(e.band_fraction_0), num(e.band_fraction_pm1), opt(e.w11_distance)]);
    }
    let mut prof = Csv::new(&["t", "u", "u_prime"]);
    let l = &report.limit;
    for i in 0..l.t.len() {
        prof.row(&[l.t[i], l.u[i], l.u_prime[i]]);
    }
    let entries: Vec<_> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "lambda": e.lambda,
                "sup_norm": e.sup_norm,
                "scaled_norm": e.scaled_norm,
                "curvature_ratio": e.curvature_ratio,
                "band_fraction_0": e.band_fraction_0,
                "band_fraction_pm1": e.band_fraction_pm1,
                "w11_distance": e.w11_distance,
                "u_prime_histogram": e.histogram,
            })
        })
        .collect();
    let mut out = Artifacts::default();
    out.csv("asymptotic.csv", csv);
    out.csv("limit_profile.csv", prof);
    out.json(
        "asymptotic.json",
        &json!({
            "family": a.family,
            "schedule": report.schedule,
            "entries": entries,
            "s_p": report.s_p,
            "limit": limit_json(l, cfg),
        }),
    )?;
    Ok(out)
}

fn spectrum_coeffs(cfg: &RunConfig) -> Result<(SturmLiouvilleCoeffs, Option<f64>), CliError> {
    let integrator = cfg.shooting().integrator;
    let family = match cfg.spectrum.source {
        SpectrumSource::Analytic => {
            let (p, q) = cfg.trig_coeffs()?;
            return Ok((SturmLiouvilleCoeffs::analytic(p, q)?.with_integrator(integrator), None));
        }
        SpectrumSource::SmallOrbit => FamilyKind::Small,
        SpectrumSource::LargeOrbit => FamilyKind::Large,
    };
    let p = cfg.problem()?;
    let orbits = find_two_solutions(&p, &cfg.window(), &cfg.shooting())?;
    let o = pick(&orbits, family, p.lambda)?;
    Ok((linearize_around(&o, &p)?.with_integrator(integrator), Some(o.sup_norm)))
}

pub fn spectrum(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let s = &cfg.spectrum;
    let (coeffs, orbit_sup) = spectrum_coeffs(cfg)?;
    let e = principal_eigenvalue(&coeffs)?;
    let higher = if s.k_max > 0 { Some(higher_eigenvalues(&coeffs, s.k_max)?) } else { None };
    let mut out = Artifacts::default();
    let mut wcsv = Csv::new(&["t", "w"]);
    for (t, w) in e.t.iter().zip(&e.w) {
        wcsv.row(&[*t, *w]);
    }
    out.csv("eigenfunction.csv", wcsv);
    if s.f_samples > 0 {
        let n = s.f_samples;
        let mus: Vec<f64> =
            (0..n).map(|i| if n == 1 { s.f_mu_min } else { s.f_mu_min + (s.f_mu_max - s.f_mu_min) * i as f64 / (n - 1) as f64 }).collect();
        let fs = mus.par_iter().map(|&m| rotation_gap(&coeffs, m)).collect::<Result<Vec<_>, _>>()?;
        let mut fcsv = Csv::new(&["mu", "f"]);
        for (m, f) in mus.iter().zip(&fs) {
            fcsv.row(&[*m, *f]);
        }
        out.csv("f_samples.csv", fcsv);
    }
    let pairs = higher.as_ref().map(|h| {
        h.pairs
            .iter()
            .map(|p| json!({ "k": p.k, "mu_prime": p.mu_prime, "mu_second": p.mu_second, "zeros_prime": p.zeros_prime, "zeros_second": p.zeros_second }))
            .collect::<Vec<_>>()
    });
    out.json(
        "eigen.json",
        &json!({
            "source": s.source,
            "lambda": orbit_sup.map(|_| cfg.problem.lambda),
            "orbit_sup_norm": orbit_sup,
            "mu0": e.mu0,
            "bracket": e.bracket,
            "residual": e.residual,
            "periodicity_defect": e.periodicity_defect,
            "zeros_of_w": e.zeros,
            "theta0": e.theta0,
            "higher": pairs,
            "interlaced": higher.as_ref().map(|h| h.interlaced(1e-8)),
        }),
    )?;
    Ok(out)
}

fn twist_json(t: &TwistReport) -> serde_json::Value {
    json!({
        "k": t.k,
        "lambda": t.lambda,
        "mu0": t.mu0,
        "inner_rotation": t.inner_rotation,
        "m_k": t.m_k,
        "outer_radius": t.outer_radius,
        "outer_rotations": t.outer_rotations,
        "verdict": t.verdict,
        "reason": t.reason.map(|r| format!("{r:?}")),
    })
}

pub fn subharmonic(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.problem()?;
    let sh = &cfg.subharmonic;
    let shooting = cfg.shooting();
    let orbits = find_two_solutions(&p, &cfg.window(), &shooting)?;
    let small = pick(&orbits, FamilyKind::Small, p.lambda)?;
    let twist = if sh.k > 0 {
        twist_check(&p, &small, sh.k, &shooting)?
    } else {
        smallest_twist_order(&p, &small, sh.k_min, sh.k_max, &shooting)?.ok_or_else(|| CliError::Check {
            message: format!("no twist verdict for k in {}..={}", sh.k_min, sh.k_max),
            detail: json!({ "lambda": p.lambda }),
        })?
    };
    if !twist.verdict {
        return Err(CliError::Check { message: "twist condition not certified".into(), detail: twist_json(&twist) });
    }
    let r = find_subharmonic(&p, &small, &twist, sh.j, &cfg.subharmonic_config())?;
    let mut out = Artifacts::default();
    for (i, o) in r.solutions.iter().enumerate() {
        let mut csv = Csv::new(&["t", "u", "u_minus_us"]);
        for s in &o.samples {
            csv.row(&[s.t, s.u(), s.u() - small.u_at(s.t)]);
        }
        let span = o.span();
        let u_end = o.trajectory.eval(span)[0];
        csv.row(&[span, u_end, u_end - small.u_at(span)]);
        out.csv(format!("subharmonic_{i}.csv"), csv);
    }
    out.json(
        "subharmonic.json",
        &json!({
            "k": r.k,
            "j": r.j,
            "lambda": p.lambda,
            "small_sup_norm": small.sup_norm,
            "zero_count": r.zero_reports.iter().map(|z| z.count()).collect::<Vec<_>>(),
            "zeros": r.zero_reports.iter().map(|z| z.zeros.clone()).collect::<Vec<_>>(),
            "minimal_period": r.zero_reports.iter().map(|z| z.minimal_period).collect::<Vec<_>>(),
            "class_separation": r.class_separation,
            "residuals": r.solutions.iter().map(|o| o.residual).collect::<Vec<_>>(),
            "sup_norms": r.solutions.iter().map(|o| o.sup_norm).collect::<Vec<_>>(),
            "windings": r.windings,
            "seeds_used": r.seeds_used,
            "twist": twist_json(&twist),
        }),
    )?;
    Ok(out)
}
