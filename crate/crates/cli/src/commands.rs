use cylspace::angular_state::{von_mises_auto, DEFAULT_TAIL_TOL};
use cylspace::epr_teleport::{sample_outcomes, teleport_sweep};
use cylspace::joint_measurement::{figure2_curve, kappa_match, kappa_match_inverse, FIGURE2_HEADER};
use cylspace::operators::{moments, omega2_closed, var_l_closed};
use cylspace::phase_space::{
    convolution_kernel, cyl_fourier, overlap_grid, p_char, p_reconstruct, q_function, wigner_char, CharGrid,
    PhaseTable,
};
use cylspace::{verify, AngularWindow, VonMisesParams};
use serde_json::{json, Value};

use crate::output::{complex_list, Artifact, Cell, Table};
use crate::{BoundCurveArgs, CliError, Command, KappaMatchArgs, MomentsArgs, PhaseKind, PhasespaceArgs, Spacing, TeleportArgs};

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("--{name} must be finite, got {x}")))
    }
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if finite(name, x)? > 0.0 {
        Ok(x)
    } else {
        Err(invalid(format!("--{name} must be positive, got {x}")))
    }
}

pub fn dispatch(cmd: &Command) -> Result<Artifact, CliError> {
    match cmd {
        Command::Moments(a) => run_moments(a),
        Command::BoundCurve(a) => run_bound_curve(a),
        Command::KappaMatch(a) => run_kappa_match(a),
        Command::Teleport(a) => run_teleport(a),
        Command::Phasespace(a) => run_phasespace(a),
        Command::Verify(_) => Ok(verify().0),
        Command::GoldenGen(_) | Command::GoldenCheck(_) => Err(invalid("golden commands produce no artifact")),
    }
}

fn run_moments(a: &MomentsArgs) -> Result<Artifact, CliError> {
    let p = VonMisesParams::new(a.n, finite("delta", a.delta)?, finite("alpha", a.alpha)?, finite("kappa", a.kappa)?)?;
    let ket = von_mises_auto(&p, DEFAULT_TAIL_TOL)?;
    let r = moments(&ket, a.l_top)?;
    let w = ket.window();
    let json = json!({
        "n": a.n,
        "delta": a.delta,
        "alpha": a.alpha,
        "kappa": a.kappa,
        "window": [w.l_min(), w.l_max()],
        "mean_L": r.mean_l,
        "var_L": r.var_l,
        "var_L_closed": var_l_closed(a.kappa),
        "omega2": r.omega2,
        "omega2_closed": omega2_closed(a.kappa),
        "uncertainty_product": r.uncertainty_product,
        "alpha_star": r.alpha_star,
        "e_moments": complex_list(r.e_moments.iter()),
    });
    let mut row = vec![Cell::Float(a.kappa), Cell::Float(r.mean_l), Cell::Float(r.var_l)];
    row.push(Cell::Float(r.omega2.unwrap_or(f64::NAN)));
    row.push(Cell::Float(r.uncertainty_product.unwrap_or(f64::NAN)));
    let csv = Table { header: vec!["kappa", "mean_L", "var_L", "omega2", "uncertainty_product"], rows: vec![row] };
    Ok(Artifact { json, csv: Some(csv) })
}

pub fn kappa_grid(min: f64, max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, CliError> {
    let (min, max) = (positive("kappa-s-min", min)?, positive("kappa-s-max", max)?);
    if min > max || points == 0 || (points == 1 && min != max) {
        return Err(invalid(format!("cannot place {points} points on [{min}, {max}]")));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let step = |i: usize| i as f64 / (points - 1) as f64;
    Ok((0..points)
        .map(|i| match spacing {
            Spacing::Linear => min + (max - min) * step(i),
            Spacing::Log => (min.ln() + (max.ln() - min.ln()) * step(i)).exp(),
        })
        .collect())
}

fn run_bound_curve(a: &BoundCurveArgs) -> Result<Artifact, CliError> {
    let grid = kappa_grid(a.kappa_s_min, a.kappa_s_max, a.points, a.spacing)?;
    let rows = figure2_curve(&grid, finite("delta-a", a.delta_a)?)?;
    let header: Vec<&'static str> = FIGURE2_HEADER.split(',').collect();
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            let obj = header.iter().zip(r.values()).map(|(k, v)| (k.to_string(), json!(v))).collect();
            Value::Object(obj)
        })
        .collect();
    let csv = Table {
        header: header.clone(),
        rows: rows.iter().map(|r| r.values().iter().map(|&v| Cell::Float(v)).collect()).collect(),
    };
    Ok(Artifact { json: json!({ "delta_a": a.delta_a, "rows": json_rows }), csv: Some(csv) })
}

fn run_kappa_match(a: &KappaMatchArgs) -> Result<Artifact, CliError> {
    let (ks, ka) = match (a.pick.kappa_a, a.pick.kappa_s) {
        (Some(ka), None) => (kappa_match(positive("kappa-a", ka)?)?, ka),
        (None, Some(ks)) => (ks, kappa_match_inverse(positive("kappa-s", ks)?)?),
        _ => return Err(invalid("give exactly one of --kappa-a and --kappa-s")),
    };
    let csv = Table { header: vec!["kappa_s", "kappa_a"], rows: vec![vec![Cell::Float(ks), Cell::Float(ka)]] };
    Ok(Artifact { json: json!({ "kappa_s": ks, "kappa_a": ka }), csv: Some(csv) })
}

fn run_teleport(a: &TeleportArgs) -> Result<Artifact, CliError> {
    let input = VonMisesParams::new(a.n, finite("delta-in", a.delta_in)?, finite("alpha", a.alpha)?, finite("kappa", a.kappa)?)?;
    let deltas = (finite("delta-a", a.delta_a)?, finite("delta-b", a.delta_b)?);
    if a.psi_grid < 2 {
        return Err(invalid("--psi-grid must be at least 2"));
    }
    let outcomes = sample_outcomes(&input, deltas, a.half_width, a.psi_grid, a.samples, a.common.seed)?;
    let results = teleport_sweep(&input, deltas, &outcomes, a.half_width)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let json_rows: Vec<Value> = results
        .iter()
        .map(|o| {
            json!({
                "m": o.m,
                "psi": o.psi,
                "fidelity": o.fidelity,
                "leakage": o.leakage,
                "delta_out": o.corrected_state.delta(),
            })
        })
        .collect();
    let min_fidelity = results.iter().map(|o| o.fidelity).fold(f64::INFINITY, f64::min);
    let json = json!({
        "input": { "n": a.n, "delta": a.delta_in, "alpha": a.alpha, "kappa": a.kappa },
        "delta_a": a.delta_a,
        "delta_b": a.delta_b,
        "half_width": a.half_width,
        "seed": a.common.seed,
        "min_fidelity": min_fidelity,
        "outcomes": json_rows,
    });
    let csv = Table {
        header: vec!["m", "psi", "fidelity", "leakage"],
        rows: results
            .iter()
            .map(|o| vec![Cell::Int(o.m), Cell::Float(o.psi), Cell::Float(o.fidelity), Cell::Float(o.leakage)])
            .collect(),
    };
    Ok(Artifact { json, csv: Some(csv) })
}

fn parse_component(s: &str, kappa: f64) -> Result<(f64, VonMisesParams), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || invalid(format!("component {s:?} is not weight:n:alpha"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let w: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let n: i64 = parts[1].trim().parse().map_err(|_| bad())?;
    let alpha: f64 = parts[2].trim().parse().map_err(|_| bad())?;
    Ok((finite("component weight", w)?, VonMisesParams::new(n, 0.0, finite("component alpha", alpha)?, kappa)?))
}

fn char_artifact(kind: &str, g: &CharGrid, excluded: Option<&[(i64, usize)]>) -> Artifact {
    let mut json = json!({
        "kind": kind,
        "l_window": [g.l_min(), g.l_max()],
        "grid_size": g.grid_size(),
        "values": complex_list(g.values().iter()),
    });
    if let Some(ex) = excluded {
        json["excluded"] = Value::Array(ex.iter().map(|(l, j)| json!([l, j])).collect());
    }
    let phis = g.phis();
    let mut rows = Vec::new();
    for l in g.labels() {
        for (j, phi) in phis.iter().enumerate() {
            let v = g.get(l, j);
            rows.push(vec![Cell::Int(l), Cell::Int(j as i64), Cell::Float(*phi), Cell::Float(v.re), Cell::Float(v.im)]);
        }
    }
    Artifact { json, csv: Some(Table { header: vec!["l", "j", "phi", "re", "im"], rows }) }
}

fn table_artifact(kind: &str, t: &PhaseTable) -> Artifact {
    let json = json!({
        "kind": kind,
        "nu2_window": [t.nu2_min(), t.nu2_max()],
        "grid_size": t.alpha_grid_size(),
        "values": complex_list(t.values().iter()),
    });
    let alphas = t.alphas();
    let mut rows = Vec::new();
    for nu2 in t.nu2_min()..=t.nu2_max() {
        for (k, a) in alphas.iter().enumerate() {
            let v = t.get(nu2, k);
            rows.push(vec![Cell::Int(nu2), Cell::Int(k as i64), Cell::Float(*a), Cell::Float(v.re), Cell::Float(v.im)]);
        }
    }
    Artifact { json, csv: Some(Table { header: vec!["nu2", "k", "alpha", "re", "im"], rows }) }
}

fn run_phasespace(a: &PhasespaceArgs) -> Result<Artifact, CliError> {
    let kappa = positive("kappa", a.kappa)?;
    if a.l_max < 0 {
        return Err(invalid("--l-max must be nonnegative"));
    }
    let (lo, hi) = (-a.l_max, a.l_max);
    match a.kind {
        PhaseKind::Overlap => return Ok(char_artifact("overlap", &overlap_grid(kappa, lo, hi, a.grid)?, None)),
        PhaseKind::Kernel => {
            return Ok(table_artifact("kernel", &convolution_kernel(kappa, a.n_half_width, a.grid)?));
        }
        _ => {}
    }
    let comps = a.components.iter().map(|c| parse_component(c, kappa)).collect::<Result<Vec<_>, _>>()?;
    let total: f64 = comps.iter().map(|c| c.0).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("component weights sum to {total}, not 1")));
    }
    let win = AngularWindow::new(-(a.window as i64), a.window as i64, 0.0, 1e-12)?;
    let rho = p_reconstruct(&comps, win)?;
    let h = a.n_half_width as i64;
    Ok(match a.kind {
        PhaseKind::WignerChar => char_artifact("wigner_char", &wigner_char(&rho, lo, hi, a.grid)?, None),
        PhaseKind::PChar => {
            let pc = p_char(&rho, kappa, lo, hi, a.grid)?;
            char_artifact("p_char", &pc.grid, Some(&pc.excluded))
        }
        PhaseKind::Q | PhaseKind::QChar => {
            let q = q_function(&rho, kappa, -h, h, a.grid)?;
            if a.kind == PhaseKind::QChar {
                char_artifact("q_char", &cyl_fourier(&q.to_table(), lo, hi, a.grid)?, None)
            } else {
                let json = json!({
                    "kind": "q",
                    "n_window": [q.n_min, q.n_max],
                    "grid_size": q.alpha_grid_size,
                    "total": q.total(),
                    "values": q.values.iter().copied().collect::<Vec<f64>>(),
                });
                let alphas = cylspace::angular_state::phi_grid(q.alpha_grid_size);
                let mut rows = Vec::new();
                for (i, n) in (q.n_min..=q.n_max).enumerate() {
                    for (k, al) in alphas.iter().enumerate() {
                        rows.push(vec![Cell::Int(n), Cell::Int(k as i64), Cell::Float(*al), Cell::Float(q.values[(i, k)])]);
                    }
                }
                Artifact { json, csv: Some(Table { header: vec!["n", "k", "alpha", "q"], rows }) }
            }
        }
        PhaseKind::Overlap | PhaseKind::Kernel => unreachable!(),
    })
}

/// The invariant report and the number of failed checks.
pub fn verify() -> (Artifact, usize) {
    let checks = verify::run_all();
    let failed = checks.iter().filter(|c| !c.passed()).count();
    for c in &checks {
        let tag = if c.passed() { "ok  " } else { "FAIL" };
        eprintln!("{tag} {:<60} residual {:.3e} (tol {:.0e})", c.name, c.residual, c.tolerance);
    }
    let json = json!({
        "passed": failed == 0,
        "checks": checks
            .iter()
            .map(|c| json!({
                "name": c.name,
                "residual": c.residual,
                "tolerance": c.tolerance,
                "passed": c.passed(),
                "detail": c.detail,
            }))
            .collect::<Vec<_>>(),
    });
    let csv = Table {
        header: vec!["index", "residual", "tolerance", "passed"],
        rows: checks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![Cell::Int(i as i64), Cell::Float(c.residual), Cell::Float(c.tolerance), Cell::Int(c.passed() as i64)]
            })
            .collect(),
    };
    (Artifact { json, csv: Some(csv) }, failed)
}
