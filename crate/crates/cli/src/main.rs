//! `alcmv`: verification suites, flows, and reports for the Ablowitz-Ladik
//! CMV toolkit.
//!
//! Exit codes: 0 all checks pass, 1 a threshold failed, 2 usage or parse
//! error, 3 numeric abort (degenerate rho, disk exit).

use alcmv::cmv;
use alcmv::coeffs::{self, SequenceCase, VerblunskySequence};
use alcmv::flows::{drift_report, integrate, FlowConfig};
use alcmv::hamiltonians::{self, DiscriminantPoly, HamiltonianSpec};
use alcmv::lax::{lax_residual, GradientMethod, LaxVariant, ResidualReport};
use alcmv::poisson::PoissonError;
use alcmv::rng::random_periodic;
use alcmv::C64;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "alcmv",
    version,
    about = "CMV-matrix toolkit for the defocusing Ablowitz-Ladik hierarchy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Coefficient file: {"case": "periodic"|"finite"|"infinite", "alphas": [[re,im],...]}
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
    /// Base seed for random inputs.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads for verification sweeps.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run Lax-pair residual suites and identity cross-checks.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run the full variant set for the input case.
        #[arg(long)]
        all: bool,
        /// Single variant, e.g. PeriodicK:2, PeriodicK0, FiniteKbar:1.
        #[arg(long)]
        variant: Option<String>,
        /// Power index when --variant is given without :n.
        #[arg(long)]
        n: Option<usize>,
        /// Floquet depth(s); may repeat.
        #[arg(long, num_args = 1..)]
        d: Vec<usize>,
        /// Gradient route: analytic or fd.
        #[arg(long, default_value = "analytic")]
        method: String,
        /// Random periodic inputs: period, taking seeds seed..seed+count.
        #[arg(long, num_args = 3, value_names = ["P", "SEED", "COUNT"])]
        random: Vec<u64>,
        /// Residual threshold for the analytic route.
        #[arg(long, default_value_t = alcmv::ANALYTIC_TOL)]
        analytic_tol: f64,
        /// Residual threshold for the finite-difference route.
        #[arg(long, default_value_t = alcmv::FD_TOL)]
        fd_tol: f64,
    },
    /// Integrate a Hamiltonian flow and report conserved-quantity drift.
    Flow {
        #[command(flatten)]
        common: CommonArgs,
        /// Generator: AL | K:n | Kbar:n | ReK:n | ImK:n | K0 | logK0.
        #[arg(long, default_value = "AL")]
        hamiltonian: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        monitor_every: usize,
        #[arg(long, default_value = "analytic")]
        method: String,
    },
    /// Scan the discriminant over the unit circle.
    Discriminant {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of grid points.
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Print conserved quantities of a periodic sequence.
    Invariants {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest K_n to report.
        #[arg(long, default_value_t = 3)]
        max_n: usize,
    },
    /// Dump a CMV-type matrix as sparse CSV (row,col,re,im).
    Dump {
        #[command(flatten)]
        common: CommonArgs,
        /// Floquet depth for periodic input.
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Window size for truncated input.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Quick internal consistency pass, including experimental comparisons.
    Selftest {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify {
            common,
            all,
            variant,
            n,
            d,
            method,
            random,
            analytic_tol,
            fd_tol,
        } => cmd_verify(
            common,
            all,
            variant,
            n,
            d,
            method,
            random,
            analytic_tol,
            fd_tol,
        ),
        Command::Flow {
            common,
            hamiltonian,
            t,
            dt,
            monitor_every,
            method,
        } => cmd_flow(common, hamiltonian, t, dt, monitor_every, method),
        Command::Discriminant { common, grid } => cmd_discriminant(common, grid),
        Command::Invariants { common, max_n } => cmd_invariants(common, max_n),
        Command::Dump { common, d, size } => cmd_dump(common, d, size),
        Command::Selftest { common } => cmd_selftest(common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("alcmv: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

fn load_coeffs(path: &Path) -> Result<VerblunskySequence, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let seq = coeffs::from_json(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    seq.validate()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        .iter()
        .for_each(|w| eprintln!("warning: {}: {}", path.display(), w.message));
    Ok(seq)
}

/// FNV-1a digest of the input bytes, for the run manifest.
fn digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn manifest(command: &str, input_digest: &str, seed: u64, thresholds: Value) -> Value {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "command": command,
        "input_digest": input_digest,
        "seed": seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "thresholds": thresholds,
        "unix_time": unix_time,
    })
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn parse_method(text: &str) -> Result<GradientMethod, CliError> {
    match text {
        "analytic" => Ok(GradientMethod::Analytic),
        "fd" => Ok(GradientMethod::Fd),
        other => Err(CliError::usage(format!(
            "unknown method {other:?}; expected analytic or fd"
        ))),
    }
}

fn variant_set(case: SequenceCase, max_n: usize) -> Vec<LaxVariant> {
    let mut out = Vec::new();
    match case {
        SequenceCase::Periodic => {
            out.push(LaxVariant::PeriodicK0);
            for n in 1..=max_n {
                out.extend([
                    LaxVariant::PeriodicK(n),
                    LaxVariant::PeriodicKbar(n),
                    LaxVariant::PeriodicReK(n),
                    LaxVariant::PeriodicImK(n),
                ]);
            }
        }
        SequenceCase::Finite => {
            for n in 1..=max_n {
                out.extend([LaxVariant::FiniteK(n), LaxVariant::FiniteKbar(n)]);
            }
        }
        SequenceCase::InfiniteTruncated => {
            for n in 1..=max_n {
                out.extend([LaxVariant::InfiniteK(n), LaxVariant::InfiniteKbar(n)]);
            }
        }
    }
    out
}

fn report_json(report: &ResidualReport, seed: Option<u64>, d: usize, threshold: f64) -> Value {
    json!({
        "variant": report.variant.label(),
        "seed": seed,
        "d": d,
        "matrix_dim": report.matrix_dim,
        "max_abs_residual": report.max_abs_residual,
        "worst_entry": [report.worst_entry.0, report.worst_entry.1],
        "method": report.method.label(),
        "wraparound_sums": report.wraparound_sums,
        "threshold": threshold,
        "pass": report.max_abs_residual < threshold,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    common: CommonArgs,
    all: bool,
    variant: Option<String>,
    n: Option<usize>,
    d_list: Vec<usize>,
    method: String,
    random: Vec<u64>,
    analytic_tol: f64,
    fd_tol: f64,
) -> Result<ExitCode, CliError> {
    let method = parse_method(&method)?;
    let threshold = match method {
        GradientMethod::Analytic => analytic_tol,
        GradientMethod::Fd => fd_tol,
    };

    // Inputs: either a file or a family of seeded random periodic sequences.
    let (inputs, input_digest, seed0): (Vec<(Option<u64>, VerblunskySequence)>, String, u64) =
        if let Some(path) = &common.coeffs {
            let seq = load_coeffs(path)?;
            let bytes = std::fs::read(path).unwrap_or_default();
            (vec![(None, seq)], digest(&bytes), common.seed)
        } else if random.len() == 3 {
            let (p, seed, count) = (random[0] as usize, random[1], random[2]);
            if p == 0 || count == 0 {
                return Err(CliError::usage("--random needs positive period and count"));
            }
            let inputs = (0..count)
                .map(|i| (Some(seed + i), random_periodic(p, seed + i)))
                .collect();
            (inputs, format!("random:p{p}:seed{seed}:count{count}"), seed)
        } else {
            return Err(CliError::usage(
                "verify needs --coeffs FILE or --random P SEED COUNT",
            ));
        };

    let case = inputs[0].1.case();
    let variants: Vec<LaxVariant> = if let Some(name) = &variant {
        let v = LaxVariant::parse(name)
            .or_else(|| n.and_then(|n| LaxVariant::parse(&format!("{name}:{n}"))))
            .ok_or_else(|| CliError::usage(format!("unknown variant {name:?}")))?;
        if v.expected_case() != case {
            return Err(CliError::usage(format!(
                "variant {} needs a {:?} sequence, input is {case:?}",
                v.label(),
                v.expected_case()
            )));
        }
        vec![v]
    } else if all {
        variant_set(case, n.unwrap_or(3))
    } else {
        return Err(CliError::usage("verify needs --all or --variant NAME"));
    };

    let depths = if d_list.is_empty() { vec![1] } else { d_list };

    // Fan the independent inputs over worker threads, keeping report order.
    let threads = common.threads.max(1).min(inputs.len().max(1));
    let chunk = inputs.len().div_ceil(threads);
    let mut reports: Vec<Vec<Result<Value, String>>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk_inputs in inputs.chunks(chunk) {
            let variants = &variants;
            let depths = &depths;
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                for (seed, seq) in chunk_inputs {
                    for variant in variants {
                        for &d in depths.iter() {
                            let r = lax_residual(*variant, seq, d, method)
                                .map(|rep| report_json(&rep, *seed, d, threshold))
                                .map_err(|e| e.to_string());
                            out.push(r);
                        }
                    }
                }
                out
            }));
        }
        for handle in handles {
            reports.push(handle.join().expect("worker panicked"));
        }
    });

    let mut flat = Vec::new();
    for r in reports.into_iter().flatten() {
        match r {
            Ok(v) => flat.push(v),
            Err(message) => return Err(CliError::numeric(message)),
        }
    }
    let all_pass = flat.iter().all(|r| r["pass"].as_bool().unwrap_or(false));

    let output = json!({
        "manifest": manifest(
            "verify",
            &input_digest,
            seed0,
            json!({"analytic": analytic_tol, "fd": fd_tol, "used": threshold}),
        ),
        "reports": flat,
    });
    let rendered = serde_json::to_string_pretty(&output).expect("serializable");
    write_or_print(&common.out, &rendered)?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn map_flow_error(e: alcmv::flows::FlowError) -> CliError {
    use alcmv::flows::FlowError::*;
    match e {
        DiskExit { .. } | StepRejected { .. } => CliError::numeric(e.to_string()),
        Gradient(PoissonError::RhoDegenerate { .. }) => CliError::numeric(e.to_string()),
        other => CliError::usage(other.to_string()),
    }
}

fn cmd_flow(
    common: CommonArgs,
    hamiltonian: String,
    t: f64,
    dt: f64,
    monitor_every: usize,
    method: String,
) -> Result<ExitCode, CliError> {
    let path = common
        .coeffs
        .as_ref()
        .ok_or_else(|| CliError::usage("flow needs --coeffs FILE"))?;
    let seq = load_coeffs(path)?;
    let spec = HamiltonianSpec::parse(&hamiltonian)
        .ok_or_else(|| CliError::usage(format!("unknown hamiltonian {hamiltonian:?}")))?;
    if dt <= 0.0 || t < 0.0 {
        return Err(CliError::usage("flow needs dt > 0 and t >= 0"));
    }
    let config = FlowConfig {
        hamiltonian: spec,
        t_end: t,
        dt,
        monitor_every: monitor_every.max(1),
        gradient_method: parse_method(&method)?,
    };
    let trajectory = integrate(&config, &seq).map_err(map_flow_error)?;

    // Trajectory CSV.
    let slots = trajectory[0].alphas.len();
    let mut csv = String::from("t");
    for j in 0..slots {
        csv.push_str(&format!(",alpha{j}_re,alpha{j}_im"));
    }
    csv.push_str(",K0,ReK1,ImK1,ReK2,ImK2,unitarity,maxmod\n");
    for record in &trajectory {
        csv.push_str(&format!("{:.12e}", record.t));
        for a in &record.alphas {
            csv.push_str(&format!(",{:.12e},{:.12e}", a.re, a.im));
        }
        let m = &record.monitors;
        csv.push_str(&format!(
            ",{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e},{:.12e}\n",
            m.k0, m.k[0].re, m.k[0].im, m.k[1].re, m.k[1].im, m.unitarity, m.max_mod
        ));
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("traj.csv"));
    std::fs::write(&out, csv)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;

    // Drift summary JSON on stdout.
    let drift = drift_report(&trajectory);
    let bytes = std::fs::read(path).unwrap_or_default();
    let output = json!({
        "manifest": manifest("flow", &digest(&bytes), common.seed, json!({"drift": 1e-6})),
        "hamiltonian": spec.label(),
        "t_end": t,
        "dt": dt,
        "records": trajectory.len(),
        "trajectory_csv": out.display().to_string(),
        "drift": drift,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("serializable")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_discriminant(common: CommonArgs, grid: usize) -> Result<ExitCode, CliError> {
    let path = common
        .coeffs
        .as_ref()
        .ok_or_else(|| CliError::usage("discriminant needs --coeffs FILE"))?;
    let seq = load_coeffs(path)?;
    if seq.case() != SequenceCase::Periodic {
        return Err(CliError::usage("discriminant needs periodic coefficients"));
    }
    if grid == 0 {
        return Err(CliError::usage("grid must be positive"));
    }
    let poly =
        DiscriminantPoly::from_sequence(&seq).map_err(|e| CliError::numeric(e.to_string()))?;
    let p2_pair = (seq.effective_period() == 2).then(|| (seq.alphas()[0], seq.alphas()[1]));

    let mut csv = String::from("theta,delta_re,delta_im");
    if p2_pair.is_some() {
        csv.push_str(",closed_form");
    }
    csv.push('\n');
    for i in 0..grid {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / grid as f64;
        let z = C64::from_polar(1.0, theta);
        let delta = poly
            .delta_at(z)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        csv.push_str(&format!("{theta:.12e},{:.12e},{:.12e}", delta.re, delta.im));
        if let Some((a, ap)) = p2_pair {
            csv.push_str(&format!(
                ",{:.12e}",
                hamiltonians::delta_closed_form_p2(a, ap, theta).re
            ));
        }
        csv.push('\n');
    }
    write_or_print(&common.out, csv.trim_end())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_invariants(common: CommonArgs, max_n: usize) -> Result<ExitCode, CliError> {
    let path = common
        .coeffs
        .as_ref()
        .ok_or_else(|| CliError::usage("invariants needs --coeffs FILE"))?;
    let seq = load_coeffs(path)?;
    if seq.case() != SequenceCase::Periodic {
        return Err(CliError::usage("invariants needs periodic coefficients"));
    }
    let k: Vec<[f64; 2]> = (1..=max_n.max(1))
        .map(|n| {
            let v = hamiltonians::k(n, &seq);
            [v.re, v.im]
        })
        .collect();
    let poly =
        DiscriminantPoly::from_sequence(&seq).map_err(|e| CliError::numeric(e.to_string()))?;
    let c: Vec<[f64; 2]> = poly.delta_coeffs().iter().map(|z| [z.re, z.im]).collect();
    let bytes = std::fs::read(path).unwrap_or_default();
    let output = json!({
        "manifest": manifest("invariants", &digest(&bytes), common.seed, json!({})),
        "K": k,
        "K0": hamiltonians::k0(&seq),
        "c": c,
        "invariant_vector": hamiltonians::invariant_vector(&seq),
    });
    let rendered = serde_json::to_string_pretty(&output).expect("serializable");
    write_or_print(&common.out, &rendered)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump(common: CommonArgs, d: usize, size: Option<usize>) -> Result<ExitCode, CliError> {
    let path = common
        .coeffs
        .as_ref()
        .ok_or_else(|| CliError::usage("dump needs --coeffs FILE"))?;
    let seq = load_coeffs(path)?;
    let matrix = match seq.case() {
        SequenceCase::Periodic => {
            cmv::build_floquet(&seq, d.max(1))
                .map_err(|e| CliError::numeric(e.to_string()))?
                .q
        }
        SequenceCase::Finite => {
            cmv::build_finite_cmv(&seq)
                .map_err(|e| CliError::numeric(e.to_string()))?
                .c
        }
        SequenceCase::InfiniteTruncated => {
            let s = size.unwrap_or(seq.len() + 8);
            cmv::halfline_window(&seq, s).map_err(|e| CliError::numeric(e.to_string()))?
        }
    };
    let mut csv = String::from("row,col,re,im\n");
    for r in 0..matrix.rows() {
        for col in 0..matrix.cols() {
            let z = matrix[(r, col)];
            if z.norm() > alcmv::STRUCTURAL_ZERO_TOL {
                csv.push_str(&format!("{r},{col},{:.12e},{:.12e}\n", z.re, z.im));
            }
        }
    }
    write_or_print(&common.out, csv.trim_end())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(common: CommonArgs) -> Result<ExitCode, CliError> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // Unitarity of the assembled matrices.
    let per = random_periodic(4, common.seed);
    let q = cmv::build_floquet(&per, 2)
        .map_err(|e| CliError::numeric(e.to_string()))?
        .q;
    let uq = q.unitarity_residual();
    check(
        "floquet unitarity",
        uq < 1e-12,
        format!("residual {uq:.2e}"),
    );

    let fin = alcmv::rng::random_finite(5, common.seed + 1);
    let cf = cmv::build_finite_cmv(&fin)
        .map_err(|e| CliError::numeric(e.to_string()))?
        .c;
    let uf = cf.unitarity_residual();
    check("finite unitarity", uf < 1e-12, format!("residual {uf:.2e}"));

    // One Lax residual per case.
    for (variant, seq) in [
        (LaxVariant::PeriodicK(2), per.clone()),
        (LaxVariant::FiniteK(2), fin.clone()),
        (
            LaxVariant::InfiniteK(2),
            alcmv::rng::random_infinite(3, common.seed + 2),
        ),
    ] {
        let report = lax_residual(variant, &seq, 1, GradientMethod::Analytic)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        check(
            &format!("lax {}", variant.label()),
            report.max_abs_residual < alcmv::ANALYTIC_TOL,
            format!("residual {:.2e}", report.max_abs_residual),
        );
    }

    // Szegő vs transfer route.
    let alphas: Vec<C64> = per.alphas().to_vec();
    let z = C64::from_polar(1.0, 0.7);
    let (phi, _) =
        alcmv::opuc::szego_run(&alphas, 4).map_err(|e| CliError::numeric(e.to_string()))?;
    let t = alcmv::opuc::transfer_product(&alphas, 4, z)
        .map_err(|e| CliError::numeric(e.to_string()))?;
    let scale = alcmv::opuc::norm_product(&alphas, 4);
    let err = (phi.eval(z) / scale - t.apply_ones().0).norm();
    check(
        "szego vs transfer",
        err < 1e-10,
        format!("deviation {err:.2e}"),
    );

    // Experimental: trace-of-transfer discriminant vs determinant route.
    // Reported, not asserted; disagreement would not fail the selftest.
    let p2 = random_periodic(2, common.seed + 3);
    let poly =
        DiscriminantPoly::from_sequence(&p2).map_err(|e| CliError::numeric(e.to_string()))?;
    let mut worst = 0.0f64;
    for i in 0..64 {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
        let zz = C64::from_polar(1.0, theta);
        let via_transfer = alcmv::opuc::transfer_discriminant(&p2, zz)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        let via_det = poly
            .delta_at(zz)
            .map_err(|e| CliError::numeric(e.to_string()))?;
        worst = worst.max((via_transfer - via_det).norm());
    }
    println!("info experimental transfer-route discriminant deviation: {worst:.2e}");

    // Zero-containment diagnostic for the Szegő polynomials.
    match alcmv::opuc::zeros_inside_unit_circle(&phi, 2048) {
        Some(count) => println!("info szego zero count inside disk: {count} (degree 4)"),
        None => println!("info szego zero diagnostic inconclusive on this draw"),
    }

    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("selftest: {failures} check(s) failed");
        Ok(ExitCode::from(1))
    }
}
