use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gbo::constants::{build_m, compute_a, solve_alpha, velocity_residual, InteractionConstants};
use gbo::diag::separation_law_fit;
use gbo::fourier::{derivative, l2_norm, write_field_csv, Grid1D, RealField};
use gbo::ground::{
    default_tail_window, fit_tail_kappa, petviashvili_solve, scaling_generator, GroundState,
};
use gbo::linop::{build_operator, localization_score, spectral_data};
use gbo::reduced::{asymptotic_fit, asymptotic_seed, integrate};
use gbo::sim::{make_multisoliton, run_experiment, Frame, SimConfig, SimState};

use crate::error::{domain, CliError};
use crate::jsonw::Json;
use crate::params::Params;

fn make_grid(params: &Params, default_n: usize, default_l: f64) -> Result<Arc<Grid1D>, CliError> {
    let n = params.usize_or("n", default_n)?;
    let half_length = params.f64_or("half_length", default_l)?;
    Ok(Arc::new(Grid1D::new(n, half_length).map_err(domain)?))
}

fn solve_ground(params: &Params, p: f64, grid: &Arc<Grid1D>) -> Result<GroundState, CliError> {
    let tol = params.f64_or("tol", 1e-12)?;
    petviashvili_solve(p, grid, tol).map_err(domain)
}

fn write_json(dir: &Path, name: &str, doc: &Json) -> Result<PathBuf, CliError> {
    std::fs::write(dir.join(name), doc.render())?;
    Ok(PathBuf::from(name))
}

fn write_field(dir: &Path, name: &str, field: &RealField) -> Result<PathBuf, CliError> {
    let file = File::create(dir.join(name))?;
    let mut out = BufWriter::new(file);
    write_field_csv(field, &mut out).map_err(domain)?;
    Ok(PathBuf::from(name))
}

/// Solve the solitary profile; record the field and its integral invariants.
pub fn ground_state(params: &Params, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = params.f64("p")?;
    let grid = make_grid(params, 8192, 400.0)?;
    let gs = solve_ground(params, p, &grid)?;
    let tail = fit_tail_kappa(&gs, default_tail_window(&grid)).map_err(domain)?;
    let field_out = write_field(dir, "ground_state.csv", gs.field())?;
    let doc = Json::Obj(vec![
        ("p".into(), Json::Num(p)),
        ("n".into(), Json::Int(grid.len() as i64)),
        ("half_length".into(), Json::Num(grid.half_length())),
        ("iterations".into(), Json::Int(gs.iterations() as i64)),
        ("residual".into(), Json::Num(gs.residual())),
        ("peak_amplitude".into(), Json::Num(gs.field().sup_norm())),
        ("mass".into(), Json::Num(gs.mass())),
        ("int_q".into(), Json::Num(gs.int_q())),
        ("int_qp".into(), Json::Num(gs.int_qp())),
        ("h_value".into(), Json::Num(gs.h_value())),
        ("q_lambda_q".into(), Json::Num(gs.q_lambda_q())),
        ("kappa0".into(), Json::Num(gs.kappa0())),
        ("kappa0_tail".into(), Json::Num(tail.kappa0)),
        ("kappa1_tail".into(), Json::Num(tail.kappa1)),
    ]);
    let summary = write_json(dir, "summary.json", &doc)?;
    Ok(vec![field_out, summary])
}

/// Spectral summary of the linearized operator around the profile.
pub fn spectrum(params: &Params, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = params.f64("p")?;
    let grid = make_grid(params, 1024, 100.0)?;
    let gs = solve_ground(params, p, &grid)?;
    let lop = build_operator(&gs);

    // Identity residuals: the scaling mode maps to -Q, the translation
    // mode to zero.
    let lam = scaling_generator(gs.field(), p);
    let mut r = lop.apply(&lam).map_err(domain)?;
    r.add_scaled(1.0, gs.field());
    let scaling_residual = l2_norm(&r) / l2_norm(gs.field());
    let qp = derivative(gs.field());
    let translation_residual = l2_norm(&lop.apply(&qp).map_err(domain)?) / l2_norm(&qp);

    let data = spectral_data(&lop).map_err(domain)?;
    let mut outputs = vec![write_field(dir, "neg_mode.csv", &data.chi0)?];
    let mut fields = vec![
        ("p".to_string(), Json::Num(p)),
        ("n".to_string(), Json::Int(grid.len() as i64)),
        ("half_length".to_string(), Json::Num(grid.half_length())),
        ("negative_eigenvalue".to_string(), Json::Num(-data.kappa)),
        ("scaling_residual".to_string(), Json::Num(scaling_residual)),
        (
            "translation_residual".to_string(),
            Json::Num(translation_residual),
        ),
        (
            "neg_mode_localization".to_string(),
            Json::Num(localization_score(&data.chi0)),
        ),
    ];
    match &data.edge {
        Some((pairs, duals)) => {
            fields.push(("edge_eigenvalue".to_string(), Json::Num(pairs.e0)));
            outputs.push(write_field(dir, "edge_plus.csv", &pairs.yplus)?);
            outputs.push(write_field(dir, "edge_minus.csv", &pairs.yminus)?);
            outputs.push(write_field(dir, "dual_plus.csv", &duals.zplus)?);
            outputs.push(write_field(dir, "dual_minus.csv", &duals.zminus)?);
        }
        None => fields.push(("edge_eigenvalue".to_string(), Json::Null)),
    }
    outputs.push(write_json(dir, "spectrum.json", &Json::Obj(fields))?);
    Ok(outputs)
}

/// Interaction constants, asymptotic velocities, and the collision matrix.
pub fn constants(params: &Params, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = params.f64("p")?;
    let n_solitons = params.usize_or("n_solitons", 2)?;
    let grid = make_grid(params, 8192, 400.0)?;
    let gs = solve_ground(params, p, &grid)?;
    let c = compute_a(&gs, n_solitons).map_err(domain)?;
    let sol = solve_alpha(&c).map_err(domain)?;
    let im = build_m(&c, &sol).map_err(domain)?;

    let a = c.coupling_matrix();
    let coupling_rows = Json::Arr(
        (0..n_solitons)
            .map(|i| Json::arr_num((0..n_solitons).map(|j| a[[i, j]]).collect::<Vec<_>>()))
            .collect(),
    );
    let doc = Json::Obj(vec![
        ("p".into(), Json::Num(p)),
        ("n_solitons".into(), Json::Int(n_solitons as i64)),
        ("signs".into(), Json::arr_num(c.signs().to_vec())),
        ("kappa0".into(), Json::Num(c.kappa0())),
        ("int_qp".into(), Json::Num(c.int_qp())),
        ("mass".into(), Json::Num(c.mass())),
        ("coupling".into(), coupling_rows),
        ("alpha".into(), Json::arr_num(sol.alpha().to_vec())),
        ("alpha_solve_residual".into(), Json::Num(sol.residual())),
        (
            "velocity_residual".into(),
            Json::Num(velocity_residual(&c, sol.alpha())),
        ),
        (
            "collision_eigenvalues".into(),
            Json::arr_num(im.eigenvalues().to_vec()),
        ),
        (
            "collision_alpha_residual".into(),
            Json::Num(im.alpha_eig_residual()),
        ),
    ]);
    Ok(vec![write_json(dir, "constants.json", &doc)?])
}

/// Integrate the reduced parameter dynamics from an asymptotic seed.
pub fn ode(params: &Params, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = params.f64("p")?;
    let n_solitons = params.usize_or("n_solitons", 2)?;
    let coupling = params.f64("coupling")?;
    let t_in = params.f64_or("t_in", 1e4)?;
    let t_end = params.f64_or("t_end", 1e6)?;
    let rtol = params.f64_or("rtol", 1e-10)?;
    let atol = params.f64_or("atol", 1e-12)?;

    let c = InteractionConstants::from_coupling(p, n_solitons, coupling).map_err(domain)?;
    let sol = solve_alpha(&c).map_err(domain)?;
    let s0 = asymptotic_seed(sol.alpha(), t_in).map_err(domain)?;
    let log = integrate(&s0, &c, t_end, rtol, atol).map_err(domain)?;

    let name = "trajectory.csv";
    {
        let mut out = BufWriter::new(File::create(dir.join(name))?);
        write!(out, "t")?;
        for i in 1..=n_solitons {
            write!(out, ",x{i}")?;
        }
        for i in 1..=n_solitons {
            write!(out, ",mu{i}")?;
        }
        writeln!(out)?;
        for st in log.states() {
            write!(out, "{:.16e}", st.t)?;
            for x in &st.x {
                write!(out, ",{x:.16e}")?;
            }
            for mu in &st.mu {
                write!(out, ",{mu:.16e}")?;
            }
            writeln!(out)?;
        }
    }

    let last = log.last();
    let alpha = sol.alpha();
    let mut scaled_gap_error = 0.0f64;
    for i in 0..n_solitons {
        for j in (i + 1)..n_solitons {
            let target = alpha[i] - alpha[j];
            let err = ((last.x[i] - last.x[j]) / last.t.sqrt() - target).abs() / target.abs();
            scaled_gap_error = scaled_gap_error.max(err);
        }
    }
    let gap_exponent = if n_solitons == 2 {
        let series: Vec<(f64, f64)> = log
            .states()
            .iter()
            .map(|st| (st.t, (st.x[0] - st.x[1]).abs()))
            .collect();
        separation_law_fit(&series)
            .map(|fit| Json::Num(fit.exponent))
            .unwrap_or(Json::Null)
    } else {
        Json::Null
    };
    let fit = asymptotic_fit(&log).ok();
    let doc = Json::Obj(vec![
        ("p".into(), Json::Num(p)),
        ("n_solitons".into(), Json::Int(n_solitons as i64)),
        ("coupling".into(), Json::Num(coupling)),
        ("t_in".into(), Json::Num(t_in)),
        ("t_end".into(), Json::Num(t_end)),
        ("alpha".into(), Json::arr_num(alpha.to_vec())),
        ("n_accepted".into(), Json::Int(log.states().len() as i64)),
        ("scaled_gap_error".into(), Json::Num(scaled_gap_error)),
        ("gap_exponent".into(), gap_exponent),
        (
            "fit_alpha".into(),
            fit.as_ref()
                .map(|f| Json::arr_num(f.alpha.clone()))
                .unwrap_or(Json::Null),
        ),
        (
            "fit_rms_residual".into(),
            fit.as_ref()
                .map(|f| Json::Num(f.rms_residual))
                .unwrap_or(Json::Null),
        ),
    ]);
    let summary = write_json(dir, "ode_summary.json", &doc)?;
    Ok(vec![PathBuf::from(name), summary])
}

/// Time-step the full equation from a multi-soliton initial condition.
pub fn simulate(params: &Params, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let p = params.f64("p")?;
    let grid = make_grid(params, 4096, 200.0)?;
    let frame = match params.str_or("frame", "comoving").as_str() {
        "lab" => Frame::Lab,
        "comoving" => Frame::Comoving,
        other => {
            return Err(CliError::Usage(format!(
                "parameter `frame`: expected lab or comoving, got {other:?}"
            )))
        }
    };
    let positions = params.f64_list("positions")?;
    let n_solitons = positions.len();
    let mus = params.f64_list_or("mus", &vec![0.0; n_solitons])?;
    let signs = params.f64_list_or("signs", &vec![1.0; n_solitons])?;
    let include_a0 = params.bool_or("include_a0", false)?;
    let t_end = params.f64("t_end")?;
    if !(t_end > 0.0) {
        return Err(CliError::Usage("parameter `t_end` must be positive".into()));
    }
    let record_stride = params.usize_or("record_stride", 100)?;
    let dealias = params.bool_or("dealias", true)?;

    let gs = solve_ground(params, p, &grid)?;
    let u0 = make_multisoliton(&gs, &positions, &mus, &signs, include_a0).map_err(domain)?;
    let amp_hint = params.f64_or("amp_hint", 1.5 * u0.sup_norm())?;
    // Default step: half the stability budget, queried off a probe config.
    let probe = SimConfig::new(&grid, p, frame, 1e-12, amp_hint).map_err(domain)?;
    let dt = params.f64_or("dt", 0.5 * probe.stability_budget())?;
    let cfg = SimConfig::new(&grid, p, frame, dt, amp_hint)
        .map_err(domain)?
        .with_dealias(dealias);
    let steps = (t_end / dt).ceil() as usize;

    let log = run_experiment(&cfg, SimState { t: 0.0, u: u0 }, n_solitons, steps, record_stride)
        .map_err(domain)?;

    let track_name = "track.csv";
    {
        let mut out = BufWriter::new(File::create(dir.join(track_name))?);
        write!(out, "t")?;
        for i in 1..=n_solitons {
            write!(out, ",x{i}")?;
        }
        for i in 1..=n_solitons {
            write!(out, ",amp{i}")?;
        }
        for i in 1..=n_solitons {
            write!(out, ",valid{i}")?;
        }
        writeln!(out)?;
        let track = &log.track;
        for (k, &t) in track.times.iter().enumerate() {
            write!(out, "{t:.16e}")?;
            for x in &track.positions[k] {
                write!(out, ",{x:.16e}")?;
            }
            for a in &track.amplitudes[k] {
                write!(out, ",{a:.16e}")?;
            }
            for v in &track.valid_mask[k] {
                write!(out, ",{}", if *v { 1 } else { 0 })?;
            }
            writeln!(out)?;
        }
    }

    // Conservation log is per step; subsample to the recording stride.
    let cons_name = "conservation.csv";
    {
        let mut out = BufWriter::new(File::create(dir.join(cons_name))?);
        writeln!(out, "t,mass,energy")?;
        let m = log.conservation.len();
        for (k, s) in log.conservation.iter().enumerate() {
            if k % record_stride == 0 || k + 1 == m {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", s.t, s.mass, s.energy)?;
            }
        }
    }

    let final_name = write_field(dir, "final_state.csv", &log.final_state.u)?;

    let m0 = log.conservation[0].mass;
    let e0 = log.conservation[0].energy;
    let (mut mass_drift, mut energy_drift) = (0.0f64, 0.0f64);
    for s in &log.conservation {
        mass_drift = mass_drift.max((s.mass - m0).abs() / m0.abs());
        energy_drift = energy_drift.max((s.energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
    }
    let track = &log.track;
    let last = track.len() - 1;
    let gap_exponent = if n_solitons == 2 && track.all_valid() {
        separation_law_fit(&track.gap_series(0, 1))
            .map(|fit| Json::Num(fit.exponent))
            .unwrap_or(Json::Null)
    } else {
        Json::Null
    };
    let doc = Json::Obj(vec![
        ("p".into(), Json::Num(p)),
        ("n".into(), Json::Int(grid.len() as i64)),
        ("half_length".into(), Json::Num(grid.half_length())),
        (
            "frame".into(),
            Json::str(match frame {
                Frame::Lab => "lab",
                Frame::Comoving => "comoving",
            }),
        ),
        ("dt".into(), Json::Num(dt)),
        ("steps".into(), Json::Int(steps as i64)),
        ("t_final".into(), Json::Num(log.final_state.t)),
        ("amp_hint".into(), Json::Num(amp_hint)),
        ("dealias".into(), Json::Bool(dealias)),
        ("include_a0".into(), Json::Bool(include_a0)),
        ("n_solitons".into(), Json::Int(n_solitons as i64)),
        ("mass_drift".into(), Json::Num(mass_drift)),
        ("energy_drift".into(), Json::Num(energy_drift)),
        (
            "final_positions".into(),
            Json::arr_num(track.positions[last].clone()),
        ),
        (
            "final_amplitudes".into(),
            Json::arr_num(track.amplitudes[last].clone()),
        ),
        ("all_valid".into(), Json::Bool(track.all_valid())),
        ("gap_exponent".into(), gap_exponent),
    ]);
    let summary = write_json(dir, "sim_summary.json", &doc)?;
    Ok(vec![
        PathBuf::from(track_name),
        PathBuf::from(cons_name),
        final_name,
        summary,
    ])
}
