//! One runner per subcommand. Each writes its files through [`Run`] and
//! leaves a summary for the printed table.

use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use serde_json::json;

use holderflow::cocycle::{lyapunov_spectrum, lyapunov_trajectory, w_series, CocycleAccumulator, LyapunovOptions};
use holderflow::fit::fit_holder;
use holderflow::flow::{spectral_estimate, twisted_birkhoff_grid, OrbitPoint, SAdicSystem, SpectralOptions};
use holderflow::rauzy::{construct_good_word, labels_to_string, rauzy_class, GoodWordCaps};
use holderflow::veech::{
    ek_covering_count, ek_track, lattice_constant, theoretical_l2, verify_lattice_constant, EkCountOptions, EkOptions,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{line_chart, Run, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    RauzyClass,
    GoodWord,
    Cocycle,
    Lyapunov,
    Birkhoff,
    Spectral,
    Veech,
    EkCount,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RauzyClass => "rauzy-class",
            Command::GoodWord => "good-word",
            Command::Cocycle => "cocycle",
            Command::Lyapunov => "lyapunov",
            Command::Birkhoff => "birkhoff",
            Command::Spectral => "spectral",
            Command::Veech => "veech",
            Command::EkCount => "ek-count",
            Command::Fit => "fit",
        }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(field, format!("must be positive, got {v}")))
    }
}

fn fraction(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::config(field, format!("must lie in (0, 1), got {v}")))
    }
}

/// Runs `cmd` and writes the manifest, also when the run fails part-way.
pub fn run_experiment(cmd: Command, cfg: ExperimentConfig) -> Result<RunManifest> {
    let mut run = Run::new(cmd.name(), cfg)?;
    let outcome = match cmd {
        Command::RauzyClass => rauzy_class_cmd(&mut run),
        Command::GoodWord => good_word_cmd(&mut run),
        Command::Cocycle => cocycle_cmd(&mut run),
        Command::Lyapunov => lyapunov_cmd(&mut run),
        Command::Birkhoff => birkhoff_cmd(&mut run),
        Command::Spectral => spectral_cmd(&mut run),
        Command::Veech => veech_cmd(&mut run),
        Command::EkCount => ek_count_cmd(&mut run),
        Command::Fit => fit_cmd(&mut run),
    };
    match outcome {
        Ok(()) => run.finish("ok"),
        Err(e) => {
            let status = match &e {
                CliError::Budget(_) => "budget_exceeded",
                CliError::Config(_) => "config_error",
                _ => "failed",
            };
            run.fail_task(cmd.name(), status);
            run.note("error", &e);
            run.finish(status)?;
            Err(e)
        }
    }
}

fn rauzy_class_cmd(run: &mut Run) -> Result<()> {
    let pi = run.cfg.permutation()?;
    let graph = rauzy_class(&pi).map_err(|e| CliError::config("pi", e))?;
    run.json("rauzy-class", "rauzy_class.json", &graph.to_json())?;
    run.text("rauzy-class", "rauzy_class.dot", &graph.to_dot())?;
    let header: Vec<String> = ["source", "target", "label", "det"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = graph
        .edges
        .iter()
        .map(|e| {
            vec![
                graph.vertices[e.source].to_string(),
                graph.vertices[e.target].to_string(),
                e.label.as_char().to_string(),
                e.matrix.det().to_string(),
            ]
        })
        .collect();
    run.csv("rauzy-class", "rauzy_edges.csv", &header, &rows)?;
    run.note("permutation", &pi);
    run.note("vertices", graph.len());
    run.note("edges", graph.edges.len());
    run.note("strongly connected", graph.is_strongly_connected());
    Ok(())
}

fn good_word_cmd(run: &mut Run) -> Result<()> {
    let pi = run.cfg.permutation()?;
    let start = run.cfg.basepoint()?;
    let graph = rauzy_class(&pi).map_err(|e| CliError::config("pi", e))?;
    let v = graph
        .vertex_index(&start)
        .ok_or_else(|| CliError::config("start", format!("{start} is not in the Rauzy class of {pi}")))?;
    let defaults = GoodWordCaps::default();
    let caps = GoodWordCaps {
        max_loop_len: run.cfg.max_loop_len.unwrap_or(defaults.max_loop_len),
        max_power: run.cfg.max_power.unwrap_or(defaults.max_power),
    };
    let gw = construct_good_word(&graph, v, caps)?;
    let lc = lattice_constant(&gw.path.substitution, &gw.return_words)?;
    let samples = run.cfg.samples.unwrap_or(10_000);
    let check = verify_lattice_constant(&lc, samples, run.cfg.seed.unwrap_or(0));
    let out = json!({
        "start": start,
        "labels": gw.path.label_string(),
        "length": gw.path.len(),
        "matrix": gw.path.matrix.to_rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "substitution": gw.path.substitution.to_json(),
        "positive_loop": labels_to_string(&gw.positive_loop),
        "power": gw.power,
        "first_letter": gw.first_letter as usize + 1,
        "return_words": gw.return_words.iter().map(|w| w.render()).collect::<Vec<_>>(),
        "checks": gw.checks,
        "lattice_constant": { "c": lc.c, "right": lc.right, "left": lc.left.to_string() },
        "lattice_check": {
            "samples": check.samples,
            "left_violations": check.left_violations,
            "right_violations": check.right_violations,
            "min_ratio": check.min_ratio,
            "max_ratio": check.max_ratio,
        },
    });
    run.json("good-word", "good_word.json", &out)?;
    run.note("basepoint", &start);
    run.note("q", gw.path.label_string());
    run.note("|q|", gw.path.len());
    run.note("simple / positive / lattice", format!("{} / {} / {}", gw.checks.simple, gw.checks.positive, gw.checks.lattice));
    run.note("C_zeta", lc.c);
    run.note("lattice check violations", check.left_violations + check.right_violations);
    Ok(())
}

fn cocycle_cmd(run: &mut Run) -> Result<()> {
    let seq = run.cfg.sequence()?;
    let n = run.cfg.n.unwrap_or(50);
    if n == 0 {
        return Err(CliError::config("n", "must be at least 1"));
    }
    let m = seq.alphabet_size();
    let traj = lyapunov_trajectory(&seq, n)?;
    let mut acc = CocycleAccumulator::new(&seq);
    let mut header: Vec<String> = vec!["n".into(), "W_n".into(), "log_norm".into()];
    header.extend((1..=m).map(|i| format!("theta_hat_{i}")));
    let mut rows = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for (k, theta) in traj.into_iter().enumerate() {
        acc.push()?;
        let log_norm = acc.matrix.log_norm_inf();
        norms.push(((k + 1) as f64, log_norm));
        let mut theta = theta;
        theta.sort_by(|a, b| b.total_cmp(a));
        let mut row = vec![(k + 1).to_string(), num(seq.w((k + 1) as i64)?), num(log_norm)];
        row.extend(theta.iter().map(|&t| num(t)));
        rows.push(row);
    }
    run.note("steps", n);
    run.note("log ||A(N)|| / N", norms.last().map_or(0.0, |p| p.1 / n as f64));
    run.note("theta_hat(N)", rows.last().map(|r| r[3..].join(" ")).unwrap_or_default());
    run.csv("cocycle", "cocycle.csv", &header, &rows)?;
    if run.cfg.svg() {
        let svg = line_chart("log ||A(n)||", "n", "log norm", &[("log_norm".into(), norms)], false, false);
        run.text("cocycle", "cocycle.svg", &svg)?;
    }
    Ok(())
}

fn lyapunov_cmd(run: &mut Run) -> Result<()> {
    let seq = run.cfg.sequence()?;
    let defaults = LyapunovOptions::default();
    let opts = LyapunovOptions {
        n: run.cfg.n.unwrap_or(100_000),
        trials: run.cfg.trials.unwrap_or(8),
        cadence: run.cfg.cadence.unwrap_or(defaults.cadence),
    };
    let est = lyapunov_spectrum(&seq, opts)?;
    let m = seq.alphabet_size();
    let mut header = vec!["trial".to_string()];
    header.extend((1..=m).map(|i| format!("theta_{i}")));
    let mut rows: Vec<Vec<String>> = est
        .per_trial
        .iter()
        .enumerate()
        .map(|(t, th)| std::iter::once((t + 1).to_string()).chain(th.iter().map(|&x| num(x))).collect())
        .collect();
    rows.push(std::iter::once("mean".to_string()).chain(est.exponents.iter().map(|&x| num(x))).collect());
    rows.push(std::iter::once("stderr".to_string()).chain(est.errors.iter().map(|&x| num(x))).collect());
    run.csv("lyapunov", "lyapunov.csv", &header, &rows)?;
    run.json("lyapunov", "lyapunov.json", &est)?;
    run.note("exponents", est.exponents.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(" "));
    run.note("spread", format!("{:.2e}", est.spread));
    run.note("sum", format!("{:.2e}", est.sum()));
    run.note("kappa (positive)", est.kappa);
    run.note("top simple", est.top_simple);
    if est.induced || est.steps_per_block != 1.0 {
        run.note("per step", est.per_step().iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}

const SPECTRAL_HEADER: [&str; 6] = ["omega", "R", "re", "im", "abs", "alpha_fit"];

fn spectral_rows(omega: f64, rs: &[f64], vals: &[(f64, f64, f64)], alpha: f64) -> Vec<Vec<String>> {
    rs.iter()
        .zip(vals)
        .map(|(&r, &(re, im, abs))| vec![num(omega), num(r), num(re), num(im), num(abs), num(alpha)])
        .collect()
}

fn birkhoff_cmd(run: &mut Run) -> Result<()> {
    let sys = SAdicSystem::new(run.cfg.sequence()?);
    let m = sys.m();
    let mu = sys.invariant_measure(0, 200)?;
    let s = run.cfg.roof(m, mu.base())?;
    let f = run.cfg.observable(mu.base(), &s)?;
    let omega = run.cfg.omega.unwrap_or(1.0);
    let rs = run.cfg.rs(1e4, 24)?;
    let budget = positive("budget", run.cfg.budget.unwrap_or(1e8))?;
    let roofs = sys.roof_levels(&s, 0)?;
    let out = twisted_birkhoff_grid(&sys, &roofs, &OrbitPoint::at_letter(0), &f, &[omega], &rs, budget)?;
    let vals: Vec<(f64, f64, f64)> = out[0].iter().map(|z| (z.re, z.im, z.norm())).collect();
    let abs: Vec<f64> = vals.iter().map(|v| v.2).collect();
    let fit = fit_holder(&rs, &abs).ok();
    let alpha = fit.as_ref().map_or(f64::NAN, |f| f.alpha);
    let header: Vec<String> = SPECTRAL_HEADER.map(String::from).to_vec();
    run.csv("birkhoff", "birkhoff.csv", &header, &spectral_rows(omega, &rs, &vals, alpha))?;
    run.note("omega", omega);
    run.note("R", rs.last().copied().unwrap_or(0.0));
    run.note("|S_R|", abs.last().copied().unwrap_or(0.0));
    match &fit {
        Some(f) => {
            run.note("alpha", format!("{:.4}", f.alpha));
            run.note("gamma", format!("{:.4}", f.gamma));
        }
        None => run.note("alpha", "degenerate fit"),
    }
    if run.cfg.svg() {
        let pts: Vec<(f64, f64)> = rs.iter().copied().zip(abs.iter().copied()).collect();
        let svg = line_chart("|S_R|", "R", "|S_R|", &[(format!("omega={omega}"), pts)], true, true);
        run.text("birkhoff", "birkhoff.svg", &svg)?;
    }
    Ok(())
}

fn spectral_cmd(run: &mut Run) -> Result<()> {
    let sys = SAdicSystem::new(run.cfg.sequence()?);
    let m = sys.m();
    let level = run.cfg.level.unwrap_or(8);
    let mu = sys.invariant_measure(level, 200)?;
    let s = run.cfg.roof(m, mu.base())?;
    let f = run.cfg.observable(mu.base(), &s)?;
    let omegas = run.cfg.omegas("1")?;
    let rs = run.cfg.rs(1e4, 8)?;
    let budget = positive("budget", run.cfg.budget.unwrap_or(1e8))?;
    let r_max = rs.last().copied().unwrap_or(0.0);
    if r_max > budget {
        return Err(CliError::Budget(format!("R = {r_max} exceeds budget {budget}")));
    }
    let opts = SpectralOptions { starts: run.cfg.starts.unwrap_or(64), level, budget };
    let roofs = sys.roof_levels(&s, level)?;
    let est = spectral_estimate(&sys, &roofs, &mu, &f, &omegas, &rs, &opts)?;
    let header: Vec<String> = SPECTRAL_HEADER.map(String::from).to_vec();
    let rows: Vec<Vec<String>> = est
        .iter()
        .flat_map(|e| {
            e.rows()
                .into_iter()
                .map(|r| vec![num(r.omega), num(r.r), num(r.re), num(r.im), num(r.abs), num(r.alpha_fit)])
        })
        .collect();
    run.csv("spectral", "spectral.csv", &header, &rows)?;
    let fits: Vec<_> = est.iter().map(|e| json!({ "omega": e.omega, "fit": e.fit })).collect();
    run.json("spectral", "spectral_fit.json", &fits)?;
    let gammas: Vec<f64> = est.iter().filter_map(|e| e.fit.as_ref().map(|f| f.gamma)).collect();
    run.note("frequencies", omegas.len());
    run.note("R grid", format!("{} points, {}..{}", rs.len(), rs[0], r_max));
    run.note("starts", opts.starts);
    if !gammas.is_empty() {
        let lo = gammas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        run.note("gamma range", format!("{lo:.4} .. {hi:.4}"));
        run.note("gamma > 0", format!("{}/{}", gammas.iter().filter(|&&g| g > 0.0).count(), gammas.len()));
    }
    if run.cfg.svg() {
        let series: Vec<(String, Vec<(f64, f64)>)> = est
            .iter()
            .map(|e| (format!("omega={}", e.omega), e.rs.iter().copied().zip(e.l2.iter().copied()).collect()))
            .collect();
        run.text("spectral", "spectral.svg", &line_chart("||S_R||_2", "R", "L2 norm", &series, true, true))?;
    }
    Ok(())
}

fn veech_cmd(run: &mut Run) -> Result<()> {
    let seq = run.cfg.sequence()?;
    let m = seq.alphabet_size();
    let roof = run.cfg.exact_roof(m)?;
    let omega = run.cfg.omega.unwrap_or(1.0);
    let n = run.cfg.n.unwrap_or(200);
    let rho = fraction("rho", run.cfg.rho.unwrap_or(0.05))?;
    let trace = ek_track(&seq, omega, &roof, n, &EkOptions { precision_bits: run.cfg.precision_bits, rho })?;
    let mut header = vec!["n".to_string()];
    header.extend((1..=m).map(|i| format!("K_{i}")));
    header.extend(["eps_inf", "W", "rho_n", "M_n", "flag"].map(String::from));
    let rows: Vec<Vec<String>> = trace
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string()];
            row.extend(r.k.iter().map(|k| k.to_string()));
            row.extend([num(r.eps_inf), num(r.w), num(r.rho_n), r.m_n.to_string(), (r.flag as u8).to_string()]);
            row
        })
        .collect();
    run.csv("veech", "veech.csv", &header, &rows)?;
    let good = trace.good_times();
    run.note("omega", omega);
    run.note("precision bits", trace.precision_bits);
    run.note("exact input", trace.exact);
    run.note("eps error bound", format!("{:.2e}", trace.error_bound));
    run.note("good times", format!("{good}/{n} (density {:.4}, rho = {rho})", good as f64 / n as f64));
    run.note("branching violations", trace.branching_violations.len());
    run.note("uniqueness violations", trace.uniqueness_violations.len());
    if run.cfg.svg() {
        let pts: Vec<(f64, f64)> = trace.rows.iter().map(|r| (r.n as f64, r.eps_inf)).collect();
        run.text("veech", "veech.svg", &line_chart("||eps_n||", "n", "sup norm", &[("eps".into(), pts)], false, true))?;
    }
    Ok(())
}

fn ek_count_cmd(run: &mut Run) -> Result<()> {
    let seq = run.cfg.sequence()?;
    let sys = SAdicSystem::new(seq.clone());
    let n = run.cfg.n.unwrap_or(20);
    let delta = fraction("delta", run.cfg.delta.unwrap_or(0.1))?;
    let b = run.cfg.b.unwrap_or(2.0);
    if !(b >= 1.0) {
        return Err(CliError::config("b", format!("must be at least 1, got {b}")));
    }
    let budget = run.cfg.budget.unwrap_or(1e7);
    let mu = sys.invariant_measure(0, 200)?.base().to_vec();
    let count = ek_covering_count(&seq, n, delta, &EkCountOptions { b, mu, budget: budget as usize })?;
    let header: Vec<String> = ["psi", "enumerated", "lattice_points", "bound"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = count
        .families
        .iter()
        .map(|f| {
            let psi: Vec<String> = f.psi.iter().map(|p| p.to_string()).collect();
            vec![psi.join(";"), f.enumerated.to_string(), f.lattice_points.to_string(), f.bound.to_string()]
        })
        .collect();
    run.csv("ek-count", "ek_count.csv", &header, &rows)?;
    let l1 = w_series(&seq, n.max(20))?.fit_l1(&[delta / 2.0, delta, (2.0 * delta).min(0.5)])?;
    let l2 = theoretical_l2(delta, seq.alphabet_size(), l1);
    run.json(
        "ek-count",
        "ek_count.json",
        &json!({
            "n": count.n,
            "delta": count.delta,
            "k0_count": count.k0_count,
            "distinct": count.distinct,
            "log_rate": count.log_rate,
            "total_bound": count.total_bound().to_string(),
            "l1": l1,
            "l2": l2,
            "rate_bound": l2 * delta * (1.0 / delta).ln(),
        }),
    )?;
    run.note("families", count.families.len());
    run.note("#K0", count.k0_count);
    run.note("distinct sequences", count.distinct);
    run.note("bound", count.total_bound());
    run.note("log rate", format!("{:.4}", count.log_rate));
    run.note("L2 delta log(1/delta)", format!("{:.4} (L1 = {l1:.3})", l2 * delta * (1.0 / delta).ln()));
    Ok(())
}

/// Per-frequency `(R, |S_R|)` samples read from a spectral CSV.
pub fn read_spectral(path: &Path) -> Result<BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => CliError::config("input", format!("{}: {e}", path.display())),
        _ => CliError::Csv(e),
    })?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::config("input", format!("missing column {name:?}")))
    };
    let (ci, cr, ca) = (col("omega")?, col("R")?, col("abs")?);
    let mut out: BTreeMap<u64, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| CliError::config("input", format!("row {}: bad number in column {}", line + 2, &headers[i])))
        };
        let omega = field(ci)?;
        let entry = out.entry(omega.to_bits()).or_insert((omega, Vec::new(), Vec::new()));
        entry.1.push(field(cr)?);
        entry.2.push(field(ca)?);
    }
    Ok(out)
}

fn fit_cmd(run: &mut Run) -> Result<()> {
    let path = run.cfg.input.clone().ok_or_else(|| CliError::config("input", "missing (--input spectral.csv)"))?;
    let data = read_spectral(&path)?;
    if data.is_empty() {
        return Err(CliError::config("input", "no data rows"));
    }
    let header: Vec<String> =
        ["omega", "alpha", "gamma", "r0", "c1", "residual_rms", "points"].map(String::from).to_vec();
    let mut rows = Vec::new();
    let mut entries: Vec<_> = data.into_values().collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (omega, rs, abs) in entries {
        let fit = fit_holder(&rs, &abs)?;
        rows.push(vec![
            num(omega),
            num(fit.alpha),
            num(fit.gamma),
            num(fit.r0),
            num(fit.c1),
            num(fit.residual_rms),
            fit.points.to_string(),
        ]);
        run.note(&format!("omega = {omega}"), format!("alpha {:.4}, gamma {:.4}, R0 {}", fit.alpha, fit.gamma, fit.r0));
    }
    run.csv("fit", "fit.csv", &header, &rows)?;
    Ok(())
}
