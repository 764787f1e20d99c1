//! The six registered experiments.

use std::f64::consts::PI;

use boson_qpe::codes::{binomial_state, cat_state, RotationCodeSpec};
use boson_qpe::crt::{acceptance_probability, detect_photon_number, generate_fock, CrtPlan};
use boson_qpe::fock::{displacement, wigner};
use boson_qpe::metrics::{fidelity, gkp_detection_fidelity, reference_error_state, rotation_infidelity, Estimator, InfidelityReport, MAX_ENUMERATED_ROUNDS};
use boson_qpe::noise::{hardware_model, HardwareCoupling};
use boson_qpe::qpe::{
    deduce_rotation_error, outcome_bits, prepare_by_projection, prepare_gkp_by_projection, Axis, GkpDetector, NoisyEngine,
    QpeEngine, QpeSchedule,
};
use boson_qpe::rng::{par_streams, stream};
use boson_qpe::{Complex64, Error, State};
use serde_json::{json, Value};

use crate::config::{EstimatorKind, ExperimentConfig, ExperimentKind, StateSpec, WignerGrid};
use crate::output::{ResultBundle, Table};
use crate::CliError;

/// Conditional states reported alongside a rotation histogram.
const SHOWCASE_TRAJECTORIES: u64 = 5;

pub fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<ResultBundle, CliError> {
    match cfg.experiment {
        ExperimentKind::DetectRotation => detect_rotation(cfg, workers),
        ExperimentKind::DetectGkp => detect_gkp(cfg, workers),
        ExperimentKind::PrepareCode => prepare_code(cfg),
        ExperimentKind::FockGenerate => fock_generate(cfg, workers),
        ExperimentKind::InfidelityScan => infidelity_scan(cfg, workers),
        ExperimentKind::HeisenbergScan => heisenberg_scan(cfg),
    }
}

fn describe(label: String, s: &QpeSchedule) -> Value {
    json!({
        "label": label,
        "rounds": s.rounds(),
        "kappa_per_us": s.kappa(),
        "times_us": s.times(),
        "t_tot_us": s.total_time(),
    })
}

fn rounds(cfg: &ExperimentConfig) -> usize {
    cfg.schedule.rounds.list()[0]
}

fn modulus(cfg: &ExperimentConfig) -> u64 {
    cfg.modulus().expect("validated")
}

fn moduli(cfg: &ExperimentConfig) -> Vec<u64> {
    cfg.schedule.moduli.clone().expect("validated")
}

/// The schedules an experiment would run, without simulating anything.
pub fn derived_schedule(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let hw = cfg.hardware();
    let list: Vec<Value> = match cfg.experiment {
        ExperimentKind::DetectRotation => {
            let s = QpeSchedule::rotation(rounds(cfg), modulus(cfg), hw.chi())?;
            vec![describe(format!("rotation N={}", modulus(cfg)), &s)]
        }
        ExperimentKind::DetectGkp => [Axis::Q, Axis::P]
            .into_iter()
            .map(|axis| Ok(describe(format!("quadrature {axis:?}"), &QpeSchedule::quadrature(rounds(cfg), axis, hw.g())?)))
            .collect::<Result<_, Error>>()?,
        ExperimentKind::PrepareCode => vec![match cfg.code {
            StateSpec::Squeezed { .. } => describe(
                "gkp-preparation Q".into(),
                &QpeSchedule::gkp_preparation(rounds(cfg), Axis::Q, hw.g())?,
            ),
            _ => describe(
                format!("rotation N={}", 2 * modulus(cfg)),
                &QpeSchedule::rotation(rounds(cfg), 2 * modulus(cfg), hw.chi())?,
            ),
        }],
        ExperimentKind::FockGenerate => {
            let plan = CrtPlan::with_chi(&moduli(cfg), rounds(cfg), hw.chi())?;
            (0..plan.moduli().len())
                .map(|k| describe(format!("stage {} N={}", k + 1, plan.moduli()[k]), &plan.schedule(k)))
                .collect()
        }
        ExperimentKind::InfidelityScan => cfg
            .schedule
            .rounds
            .list()
            .into_iter()
            .map(|m| Ok(describe(format!("rotation N={} m={m}", modulus(cfg)), &QpeSchedule::rotation(m, modulus(cfg), hw.chi())?)))
            .collect::<Result<_, Error>>()?,
        ExperimentKind::HeisenbergScan => {
            let mut out = Vec::new();
            for n in moduli(cfg) {
                for m in cfg.schedule.rounds.list() {
                    out.push(describe(format!("rotation N={n} m={m}"), &QpeSchedule::rotation(m, n, hw.chi())?));
                }
            }
            out
        }
    };
    let t_tot: f64 = list.iter().map(|s| s["t_tot_us"].as_f64().unwrap_or(0.0)).sum();
    Ok(json!({ "experiment": cfg.experiment.name(), "schedules": list, "t_tot_us": t_tot }))
}

fn wigner_table(state: &State, grid: Option<WignerGrid>) -> Option<Table> {
    let grid = grid?;
    let n = grid.points;
    let axis: Vec<f64> = (0..n).map(|i| -grid.extent + 2.0 * grid.extent * i as f64 / (n - 1) as f64).collect();
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&x| axis.iter().map(move |&p| (x, p))).collect();
    let w = wigner(state, &points);
    let mut t = Table::new(&["x", "p", "w"]);
    for ((x, p), v) in points.into_iter().zip(w) {
        t.push(vec![x.into(), p.into(), v.into()]);
    }
    Some(t)
}

fn estimator(cfg: &ExperimentConfig, workers: usize) -> Estimator {
    match cfg.sampling.estimator {
        EstimatorKind::Exact => Estimator::Exact,
        EstimatorKind::Sampled => Estimator::Sampled { samples: cfg.sampling.samples, seed: cfg.sampling.seed, workers },
    }
}

fn detect_rotation(cfg: &ExperimentConfig, workers: usize) -> Result<ResultBundle, CliError> {
    let input = cfg.input_state()?;
    let n = modulus(cfg);
    let m = rounds(cfg);
    let hw = cfg.hardware();
    let schedule = QpeSchedule::rotation(m, n, hw.chi())?;
    let samples = cfg.sampling.samples;
    let seed = cfg.sampling.seed;
    let ideal = QpeEngine::new(schedule, input.dim())?;
    let noisy = match cfg.noise {
        Some(_) => Some(NoisyEngine::new(schedule, hardware_model(HardwareCoupling::Dispersive, input.dim(), &hw)?)?),
        None => None,
    };

    let (probabilities, counts) = match &noisy {
        None => (
            ideal.analytic_distribution(&input)?.probabilities().to_vec(),
            ideal.sample_counts(&input, samples, seed, workers)?,
        ),
        Some(engine) => {
            let outcomes = par_streams(seed, samples, workers, |_, rng| engine.run(&input, rng).map(|t| t.outcome()));
            let mut counts = vec![0u64; schedule.outcomes() as usize];
            for j in outcomes {
                counts[j? as usize] += 1;
            }
            let probabilities = if m <= MAX_ENUMERATED_ROUNDS {
                engine.branch_probabilities(&input)?
            } else {
                counts.iter().map(|&c| c as f64 / samples as f64).collect()
            };
            (probabilities, counts)
        }
    };

    let mut hist = Table::new(&["j", "theta", "probability", "count", "lost"]);
    let mut masses = vec![0.0; n as usize];
    for (j, (&p, &count)) in probabilities.iter().zip(&counts).enumerate() {
        let theta = j as f64 / (1u64 << m) as f64;
        let (l, lost) = deduce_rotation_error(theta, n);
        masses[l as usize] += p;
        hist.push(vec![j.into(), theta.into(), p.into(), count.into(), lost.into()]);
    }

    // A few sampled trajectories with the fidelity of their conditional
    // state to the reference of the deduced bin.
    let showcase = par_streams(seed, SHOWCASE_TRAJECTORIES, workers, |k, _| -> Result<Value, Error> {
        let mut rng = stream(seed, samples + k);
        let t = match &noisy {
            None => ideal.run(&input, &mut rng)?,
            Some(e) => e.run(&input, &mut rng)?,
        };
        let (l, lost) = deduce_rotation_error(t.theta, n);
        let f = match reference_error_state(&input, n as usize, l as usize) {
            Ok(r) => Some(fidelity(&t.state, &r)?),
            Err(Error::UndefinedReference { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(json!({ "theta": t.theta, "lost": lost, "probability": t.probability, "reference_fidelity": f }))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let peak = (0..probabilities.len()).fold(0, |b, j| if probabilities[j] > probabilities[b] { j } else { b });
    Ok(ResultBundle {
        histogram: hist,
        wigner: wigner_table(&input, cfg.output.wigner),
        extra: Vec::new(),
        summary: json!({
            "experiment": cfg.experiment.name(),
            "modulus": n,
            "rounds": m,
            "noisy": noisy.is_some(),
            "t_tot_us": schedule.total_time(),
            "samples": samples,
            "seed": seed,
            "mean_photon_number": input.mean_photon_number(),
            "bin_masses": masses,
            "peak_theta": peak as f64 / (1u64 << m) as f64,
            "trajectories": showcase,
        }),
    })
}

fn detect_gkp(cfg: &ExperimentConfig, workers: usize) -> Result<ResultBundle, CliError> {
    let ideal = cfg.code.build()?;
    let m = rounds(cfg);
    let hw = cfg.hardware();
    let mut shifted = ideal.clone();
    if let Some([x, p]) = cfg.schedule.injected {
        let s = (PI / 2.0).sqrt();
        shifted = shifted.transform(&displacement(Complex64::new(x * s, p * s), ideal.dim())?)?;
    }
    let input = cfg.lossy(shifted)?;
    let noise = cfg.noise.map(|_| hw);
    let detector = match &noise {
        Some(params) => GkpDetector::with_noise(m, input.dim(), params)?,
        None => GkpDetector::new(m, hw.g(), input.dim())?,
    };
    let est = match estimator(cfg, workers) {
        Estimator::Exact if 2 * m > MAX_ENUMERATED_ROUNDS => {
            Estimator::Sampled { samples: cfg.sampling.samples, seed: cfg.sampling.seed, workers }
        }
        e => e,
    };
    let report = gkp_detection_fidelity(&input, &ideal, m, hw.g(), noise.as_ref(), est)?;

    let outcomes = par_streams(cfg.sampling.seed, cfg.sampling.samples, workers, |_, rng| {
        detector.run(&input, rng).map(|t| t.outcome.indices())
    });
    let side = 1usize << m;
    let mut counts = vec![0u64; side * side];
    for o in outcomes {
        let (jx, jp) = o?;
        counts[jx as usize * side + jp as usize] += 1;
    }
    let mut probability = vec![0.0; side * side];
    let mut fid = vec![f64::NAN; side * side];
    for s in &report.per_outcome {
        let k = s.index_x as usize * side + s.index_p as usize;
        probability[k] = s.probability;
        fid[k] = s.fidelity;
    }

    let centred = |j: usize| boson_qpe::qpe::centred(j as f64 / side as f64);
    let mut hist = Table::new(&["index_x", "index_p", "delta_x", "delta_p", "probability", "count", "fidelity"]);
    let mut marginal_x = vec![0.0; side];
    let mut marginal_p = vec![0.0; side];
    for jx in 0..side {
        for jp in 0..side {
            let k = jx * side + jp;
            marginal_x[jx] += probability[k];
            marginal_p[jp] += probability[k];
            let f = if fid[k].is_nan() { 0.0 } else { fid[k] };
            hist.push(vec![
                jx.into(),
                jp.into(),
                centred(jx).into(),
                centred(jp).into(),
                probability[k].into(),
                counts[k].into(),
                f.into(),
            ]);
        }
    }
    let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, j| if v[j] > v[b] { j } else { b });
    Ok(ResultBundle {
        histogram: hist,
        wigner: wigner_table(&input, cfg.output.wigner),
        extra: Vec::new(),
        summary: json!({
            "experiment": cfg.experiment.name(),
            "rounds": m,
            "noisy": report.noisy,
            "g_mhz": hw.g_mhz,
            "t_tot_us": detector.total_time(),
            "injected": cfg.schedule.injected,
            "average_fidelity": report.average,
            "std_error": report.std_error,
            "estimator": if report.samples.is_some() { "sampled" } else { "exact" },
            "peak_delta_x": centred(argmax(&marginal_x)),
            "peak_delta_p": centred(argmax(&marginal_p)),
            "samples": cfg.sampling.samples,
            "seed": cfg.sampling.seed,
        }),
    })
}

fn prepare_code(cfg: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let primitive = cfg.input_state()?;
    let m = rounds(cfg);
    let hw = cfg.hardware();
    let mu = cfg.schedule.target.unwrap_or(0) as u8;
    let dim = primitive.dim();
    let (prep, schedule, default_reference) = match cfg.code {
        StateSpec::Squeezed { .. } => {
            let s = QpeSchedule::gkp_preparation(m, Axis::Q, hw.g())?;
            (prepare_gkp_by_projection(&primitive, mu, m, hw.g())?, s, None)
        }
        StateSpec::Coherent { alpha, .. } => {
            let n = modulus(cfg);
            let s = QpeSchedule::rotation(m, 2 * n, hw.chi())?;
            let r = cat_state(&RotationCodeSpec::cat(n as usize, alpha, mu, dim)?)?;
            (prepare_by_projection(&primitive, n, mu, m, hw.chi())?, s, Some(r))
        }
        StateSpec::BinomialPrimitive { k, .. } => {
            let n = modulus(cfg);
            let s = QpeSchedule::rotation(m, 2 * n, hw.chi())?;
            let r = binomial_state(&RotationCodeSpec::binomial(n as usize, k, mu, dim)?)?;
            (prepare_by_projection(&primitive, n, mu, m, hw.chi())?, s, Some(r))
        }
        _ => unreachable!("validated"),
    };
    let reference = match &cfg.reference {
        Some(spec) => Some(spec.build()?),
        None => default_reference,
    };
    // Intermediate states carry no frame correction; only the final state
    // of a GKP preparation is corrected.
    let (final_fidelity, step_fidelity) = match &reference {
        Some(r) => (
            Some(fidelity(&prep.state, r)?),
            prep.steps.iter().map(|s| fidelity(s, r)).collect::<Result<Vec<_>, _>>()?,
        ),
        None => (None, Vec::new()),
    };

    let engine = QpeEngine::new(schedule, dim)?;
    let dist = engine.analytic_distribution(&primitive)?;
    let target = (mu as u64) << (m - 1);
    let mut hist = Table::new(&["j", "theta", "probability", "selected"]);
    for (j, (theta, p)) in dist.iter().enumerate() {
        hist.push(vec![j.into(), theta.into(), p.into(), u64::from(j as u64 == target).into()]);
    }
    Ok(ResultBundle {
        histogram: hist,
        wigner: wigner_table(&prep.state, cfg.output.wigner),
        extra: Vec::new(),
        summary: json!({
            "experiment": cfg.experiment.name(),
            "rounds": m,
            "logical": mu,
            "t_tot_us": schedule.total_time(),
            "selection_probability": prep.probability,
            "bits": prep.bits,
            "fidelity": final_fidelity,
            "step_fidelity": step_fidelity,
            "mean_photon_number": prep.state.mean_photon_number(),
        }),
    })
}

fn fock_generate(cfg: &ExperimentConfig, workers: usize) -> Result<ResultBundle, CliError> {
    let input = cfg.input_state()?;
    let m = rounds(cfg);
    let hw = cfg.hardware();
    let plan = CrtPlan::with_chi(&moduli(cfg), m, hw.chi())?;
    let target = cfg.schedule.target.expect("validated");
    let seed = cfg.sampling.seed;
    let outcomes = 1usize << m;
    let stages = plan.moduli().len();
    let mut hist = Table::new(&["panel", "stage", "modulus", "j", "theta", "value", "residue"]);

    // Detection of |target⟩ itself, one seeded trajectory per sample.
    let fock = State::fock(target as usize, input.dim())?;
    let runs = par_streams(seed, cfg.sampling.samples, workers, |_, rng| detect_photon_number(&fock, &plan, rng));
    let mut counts = vec![vec![0u64; outcomes]; stages];
    let mut detected = Vec::new();
    for r in runs {
        let thetas = match r {
            Ok(d) => {
                detected.push(json!(d.photon_number));
                d.thetas
            }
            Err(Error::LowConfidence { outcomes, .. }) => {
                detected.push(Value::Null);
                outcomes
            }
            Err(e) => return Err(e.into()),
        };
        for (k, theta) in thetas.iter().enumerate() {
            counts[k][(theta * outcomes as f64).round() as usize % outcomes] += 1;
        }
    }
    for (k, &n) in plan.moduli().iter().enumerate() {
        for j in 0..outcomes {
            let theta = j as f64 / outcomes as f64;
            let l = deduce_rotation_error(theta, n).0;
            hist.push(vec!["detect".into(), (k + 1).into(), n.into(), j.into(), theta.into(), (counts[k][j] as f64).into(), l.into()]);
        }
    }

    let generated = generate_fock(&input, target, &plan, seed, cfg.sampling.max_attempts, workers)?;
    // Stage-by-stage outcome distributions along the accepted trajectory.
    let mut current = input.clone();
    for (k, &n) in plan.moduli().iter().enumerate() {
        let engine = QpeEngine::new(plan.schedule(k), input.dim())?;
        let dist = engine.analytic_distribution(&current)?;
        for (j, (theta, p)) in dist.iter().enumerate() {
            let l = deduce_rotation_error(theta, n).0;
            hist.push(vec!["generate".into(), (k + 1).into(), n.into(), j.into(), theta.into(), p.into(), l.into()]);
        }
        let j = (generated.thetas[k] * outcomes as f64).round() as u64 % outcomes as u64;
        if let (_, Some(next)) = engine.superoperator(&current, &outcome_bits(j, m))? {
            current = next;
        }
    }
    let pops = generated.state.populations();
    let mut populations = Table::new(&["n", "probability"]);
    for (n, p) in pops.iter().enumerate() {
        populations.push(vec![n.into(), (*p).into()]);
    }
    let hits = detected.iter().filter(|d| d.as_u64() == Some(target)).count();
    Ok(ResultBundle {
        histogram: hist,
        wigner: wigner_table(&generated.state, cfg.output.wigner),
        extra: vec![("populations", populations)],
        summary: json!({
            "experiment": cfg.experiment.name(),
            "moduli": plan.moduli(),
            "rounds": m,
            "target": target,
            "t_tot_us": plan.total_time(),
            "detected": detected,
            "detection_hits": hits,
            "detection_samples": cfg.sampling.samples,
            "accepted_attempt": generated.attempt,
            "attempts": generated.attempts,
            "accepted": generated.accepted,
            "acceptance_rate": generated.acceptance_rate(),
            "acceptance_probability": acceptance_probability(&input, target, &plan),
            "target_population": pops.get(target as usize).copied().unwrap_or(0.0),
            "mean_photon_number": generated.state.mean_photon_number(),
            "seed": seed,
        }),
    })
}

fn bin_rows(hist: &mut Table, lead: &[u64], r: &InfidelityReport) {
    for b in &r.per_bin {
        let mut row: Vec<_> = lead.iter().map(|&v| v.into()).collect();
        row.extend([r.t_tot.into(), b.l.into(), b.lost.into(), b.probability.into(), b.mean_infidelity.into()]);
        hist.push(row);
    }
}

fn infidelity_scan(cfg: &ExperimentConfig, workers: usize) -> Result<ResultBundle, CliError> {
    let input = cfg.input_state()?;
    let n = modulus(cfg);
    let hw = cfg.hardware();
    let model = match cfg.noise {
        Some(_) => Some(hardware_model(HardwareCoupling::Dispersive, input.dim(), &hw)?),
        None => None,
    };
    let mut hist = Table::new(&["rounds", "t_tot", "l", "lost", "probability", "mean_infidelity"]);
    let mut scan = Table::new(&["rounds", "t_tot", "total", "std_error"]);
    let mut reports = Vec::new();
    for m in cfg.schedule.rounds.list() {
        let s = QpeSchedule::rotation(m, n, hw.chi())?;
        let r = rotation_infidelity(&input, &s, model.as_ref(), estimator(cfg, workers))?;
        bin_rows(&mut hist, &[m as u64], &r);
        scan.push(vec![m.into(), r.t_tot.into(), r.total.into(), r.std_error.into()]);
        reports.push(r);
    }
    let best = reports.iter().min_by(|a, b| a.total.total_cmp(&b.total)).expect("validated non-empty");
    Ok(ResultBundle {
        histogram: hist,
        wigner: wigner_table(&input, cfg.output.wigner),
        extra: vec![("infidelity", scan)],
        summary: json!({
            "experiment": cfg.experiment.name(),
            "modulus": n,
            "noisy": model.is_some(),
            "optimal_rounds": best.rounds,
            "minimum_infidelity": best.total,
            "reports": reports,
        }),
    })
}

/// Least-squares slope of `ln y` against `ln x`; `None` when fewer than two
/// points have positive coordinates.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn heisenberg_scan(cfg: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let hw = cfg.hardware();
    let mut hist = Table::new(&["modulus", "rounds", "t_tot", "l", "lost", "probability", "mean_infidelity"]);
    let mut scan = Table::new(&["modulus", "rounds", "t_tot", "chi_t_tot", "deduction_infidelity"]);
    let mut slopes = serde_json::Map::new();
    for n in moduli(cfg) {
        let input = cfg.lossy(cfg.code.with_order(n as usize).build()?)?;
        let mut points = Vec::new();
        for m in cfg.schedule.rounds.list() {
            let s = QpeSchedule::rotation(m, n, hw.chi())?;
            let r = rotation_infidelity(&input, &s, None, Estimator::Exact)?;
            bin_rows(&mut hist, &[n, m as u64], &r);
            scan.push(vec![n.into(), m.into(), r.t_tot.into(), (hw.chi() * r.t_tot).into(), r.total.into()]);
            points.push((r.t_tot, r.total));
        }
        slopes.insert(n.to_string(), json!(loglog_slope(&points)));
    }
    Ok(ResultBundle {
        histogram: hist,
        wigner: None,
        extra: vec![("scaling", scan)],
        summary: json!({
            "experiment": cfg.experiment.name(),
            "chi_mhz": hw.chi_mhz,
            "slopes": slopes,
        }),
    })
}
