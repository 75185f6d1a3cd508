//! Command-line driver: simulations, convergence/frequency studies, kernel
//! benchmarks and coefficient-table reports.

use bbwadg::config::{MeshSpec, Mode, RunConfig, System, WavespeedModel};
use bbwadg::output::{fmt_f64, CsvTable};
use bbwadg::solver::Simulation;
use bbwadg::studies;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "bbwadg", about = "Bernstein-Bezier weight-adjusted DG wave solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    /// Update mode: fast | oracle | exact.
    #[arg(long)]
    mode: Option<String>,
    /// Mesh spec: uniform:<n> or gmsh:<path>.
    #[arg(long)]
    mesh: Option<String>,
    /// Wavespeed spec: const:<v> or sine:<k>.
    #[arg(long)]
    wavespeed: Option<String>,
    #[arg(long = "T")]
    final_time: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long = "tau-p")]
    tau_p: Option<f64>,
    #[arg(long = "tau-u")]
    tau_u: Option<f64>,
    #[arg(long = "tau-v")]
    tau_v: Option<f64>,
    #[arg(long = "tau-sigma")]
    tau_sigma: Option<f64>,
    /// Output directory for CSV/VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write VTK snapshots every this many steps.
    #[arg(long, default_value_t = 0)]
    vtk_every: usize,
    #[arg(long, default_value_t = 0)]
    vtk_subsample: usize,
    /// Plain simulation: no manufactured source or error report.
    #[arg(long, default_value_t = false)]
    plain: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and report the final error / energy.
    Solve(CommonOpts),
    /// Mesh-refinement convergence study.
    Convergence {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated uniform cell counts, e.g. 4,8,16,32.
        #[arg(long, default_value = "4,8,16,32")]
        cells: String,
    },
    /// Error versus weight degree M for several wavespeed frequencies.
    Frequency {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "1,4,8,12")]
        ks: String,
        #[arg(long, default_value = "0,1,2")]
        ms: String,
    },
    /// Kernel complexity benchmark (counted multiply-adds + wall time).
    Bench {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long = "M", default_value_t = 1)]
        m: usize,
        /// Degree range, e.g. 2..8.
        #[arg(long = "N", default_value = "2..8")]
        n_range: String,
        #[arg(long, default_value_t = 1024)]
        elements: usize,
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print projection coefficient rows (and optionally write CSV).
    Coeffs {
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the degree-N sparse operators (barycentric derivatives,
        /// one-degree elevation, lift kernel) as `row col value` text files.
        #[arg(long, default_value_t = false)]
        dump_operators: bool,
    },
    /// Mass-inverse roundoff study.
    Roundoff {
        #[arg(long = "N", default_value_t = 7)]
        n_max: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fast-versus-quadrature equivalence battery and material projection
    /// checks.
    ProjectCheck {
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = 2)]
        m_max: usize,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_config(opts: &CommonOpts) -> Result<RunConfig, Box<dyn std::error::Error>> {
    let mut cfg: RunConfig = if let Some(path) = &opts.config {
        RunConfig::from_json(&std::fs::read_to_string(path)?)?
    } else {
        RunConfig {
            system: System::Acoustic,
            dim: 2,
            n: 3,
            m: 1,
            mode: Mode::Fast,
            mesh: MeshSpec::Uniform(8),
            wavespeed: WavespeedModel::Sine { k: 1.0 },
            final_time: 1.0,
            cfl: 0.5,
            tau_p: 1.0,
            tau_u: 1.0,
            tau_v: 1.0,
            tau_sigma: 1.0,
            out_dir: None,
            seed: 0,
            vtk_every: 0,
            vtk_subsample: 0,
            plain: false,
        }
    };
    if let Some(s) = &opts.system {
        cfg.system = match s.as_str() {
            "acoustic" => System::Acoustic,
            "elastic" => System::Elastic,
            other => return Err(format!("unknown system {other}").into()),
        };
    }
    if let Some(d) = opts.dim {
        cfg.dim = d;
    }
    if let Some(n) = opts.n {
        cfg.n = n;
    }
    if let Some(m) = opts.m {
        cfg.m = m;
    }
    if let Some(mode) = &opts.mode {
        cfg.mode = match mode.as_str() {
            "fast" => Mode::Fast,
            "oracle" => Mode::Oracle,
            "exact" => Mode::Exact,
            other => return Err(format!("unknown mode {other}").into()),
        };
    }
    if let Some(mesh) = &opts.mesh {
        cfg.mesh = MeshSpec::parse(mesh)?;
    }
    if let Some(w) = &opts.wavespeed {
        cfg.wavespeed = WavespeedModel::parse(w)?;
    }
    if let Some(t) = opts.final_time {
        cfg.final_time = t;
    }
    if let Some(c) = opts.cfl {
        cfg.cfl = c;
    }
    if let Some(v) = opts.tau_p {
        cfg.tau_p = v;
    }
    if let Some(v) = opts.tau_u {
        cfg.tau_u = v;
    }
    if let Some(v) = opts.tau_v {
        cfg.tau_v = v;
    }
    if let Some(v) = opts.tau_sigma {
        cfg.tau_sigma = v;
    }
    if let Some(o) = &opts.out {
        cfg.out_dir = Some(o.display().to_string());
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    cfg.vtk_every = opts.vtk_every;
    cfg.vtk_subsample = opts.vtk_subsample;
    if opts.plain {
        cfg.plain = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir
        .as_deref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, Box<dyn std::error::Error>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("{e}").into()))
        .collect()
}

fn parse_range(s: &str) -> Result<Vec<usize>, Box<dyn std::error::Error>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.parse()?;
        let b: usize = b.parse()?;
        if b < a {
            return Err("empty degree range".into());
        }
        Ok((a..=b).collect())
    } else {
        parse_list(s)
    }
}

fn run_solve(opts: &CommonOpts) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = build_config(opts)?;
    let sim = Simulation::new(cfg.clone())?;
    println!(
        "solve: {:?} d={} N={} M={} mode={:?}, {} elements, dt={}, {} steps",
        cfg.system,
        cfg.dim,
        cfg.n,
        cfg.m,
        cfg.mode,
        sim.mesh.num_elements(),
        fmt_f64(sim.dt),
        sim.steps
    );
    let dir = out_dir(&cfg);
    if cfg.vtk_every > 0 {
        run_with_snapshots(&cfg, &sim, &dir)?;
        return Ok(());
    }
    let energy_every = if cfg.plain { sim.steps.max(1) } else { 0 };
    let out = sim.run(energy_every)?;
    let mut csv = CsvTable::new(&["quantity", "value"]);
    csv.push(vec!["dt".into(), fmt_f64(out.dt)]);
    csv.push(vec!["steps".into(), out.steps.to_string()]);
    if let Some(err) = out.final_error_p {
        println!("final pressure L2 error: {}", fmt_f64(err));
        csv.push(vec!["l2_error_p".into(), fmt_f64(err)]);
    }
    if let (Some(first), Some(last)) = (out.energies.first(), out.energies.last()) {
        println!("energy: {} -> {}", fmt_f64(*first), fmt_f64(*last));
        csv.push(vec!["energy_initial".into(), fmt_f64(*first)]);
        csv.push(vec!["energy_final".into(), fmt_f64(*last)]);
    }
    csv.write(&dir.join("solve.csv"))?;
    println!("wrote {}", dir.join("solve.csv").display());
    Ok(())
}

fn run_with_snapshots(
    cfg: &RunConfig,
    sim: &Simulation,
    dir: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    use bbwadg::kernels::StateVec;
    use bbwadg::time::{lsrk4_step, Lsrk4};
    let mut state = sim.initial_state();
    let mut residual = StateVec::zeros(state.nelem, state.ncomp, state.np);
    let mut rhs_buf = StateVec::zeros(state.nelem, state.ncomp, state.np);
    let scheme = Lsrk4::default();
    let names: Vec<&str> = match cfg.system {
        System::Acoustic => match cfg.dim {
            2 => vec!["p", "u1", "u2"],
            _ => vec!["p", "u1", "u2", "u3"],
        },
        System::Elastic => vec!["v1", "v2", "v3", "sxx", "syy", "szz", "syz", "sxz", "sxy"],
    };
    bbwadg::output::write_vtk(
        &dir.join("snap_000000.vtk"),
        &sim.mesh,
        &state,
        &names,
        cfg.n,
        cfg.vtk_subsample,
    )?;
    for step in 0..sim.steps {
        let t = step as f64 * sim.dt;
        lsrk4_step(
            &scheme,
            &mut state,
            &mut residual,
            &mut rhs_buf,
            t,
            sim.dt,
            step,
            |s, tau, out| sim.rhs(s, tau, out),
        )?;
        if (step + 1) % cfg.vtk_every == 0 || step + 1 == sim.steps {
            let path = dir.join(format!("snap_{:06}.vtk", step + 1));
            bbwadg::output::write_vtk(&path, &sim.mesh, &state, &names, cfg.n, cfg.vtk_subsample)?;
        }
    }
    if !cfg.plain && cfg.system == System::Acoustic {
        let err = sim.l2_error(&state, cfg.final_time);
        println!("final pressure L2 error: {}", fmt_f64(err));
    }
    println!("snapshots in {}", dir.display());
    Ok(())
}

fn main() {
    bbwadg::init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(opts) => run_solve(opts),
        Command::Convergence { common, cells } => (|| {
            let cfg = build_config(common)?;
            let cells: Vec<usize> = parse_list(cells)?;
            let rows = studies::convergence_study(&cfg, &cells)?;
            for r in &rows {
                println!(
                    "h={:<10} error={:<24} rate={}",
                    fmt_f64(r.h),
                    fmt_f64(r.error),
                    if r.rate.is_nan() {
                        "-".to_string()
                    } else {
                        format!("{:.3}", r.rate)
                    }
                );
            }
            let dir = out_dir(&cfg);
            studies::convergence_csv(&cfg, &rows).write(&dir.join("convergence.csv"))?;
            println!("wrote {}", dir.join("convergence.csv").display());
            Ok(())
        })(),
        Command::Frequency { common, ks, ms } => (|| {
            let cfg = build_config(common)?;
            let ks: Vec<f64> = parse_list(ks)?;
            let ms: Vec<usize> = parse_list(ms)?;
            let rows = studies::frequency_study(&cfg, &ks, &ms)?;
            for r in &rows {
                println!("k={:<6} M={:<3} error={}", r.k, r.m, fmt_f64(r.error));
            }
            let dir = out_dir(&cfg);
            studies::frequency_csv(&cfg, &rows).write(&dir.join("frequency.csv"))?;
            println!("wrote {}", dir.join("frequency.csv").display());
            Ok(())
        })(),
        Command::Bench {
            dim,
            m,
            n_range,
            elements,
            repetitions,
            out,
            seed,
        } => (|| {
            let ns = parse_range(n_range)?;
            let rows = studies::kernel_benchmark(&ns, *m, *dim, *elements, *repetitions, *seed)?;
            let collect = |mode: Mode| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
                let sel: Vec<&studies::BenchRow> =
                    rows.iter().filter(|r| r.mode == mode).collect();
                (
                    sel.iter().map(|r| r.n as f64).collect(),
                    sel.iter()
                        .map(|r| studies::effective_degree(r.n, *dim))
                        .collect(),
                    sel.iter().map(|r| r.madds_per_element).collect(),
                )
            };
            for r in &rows {
                println!(
                    "N={:<3} mode={:<7} madds/elem={:<12} ns/elem={:.1}",
                    r.n,
                    format!("{:?}", r.mode).to_lowercase(),
                    r.madds_per_element,
                    r.nanos_per_element
                );
            }
            for mode in [Mode::Fast, Mode::Oracle] {
                let (ns_raw, ns_eff, counts) = collect(mode);
                if ns_raw.len() >= 2 {
                    println!(
                        "{:?}: count slope {:.2} (vs N), {:.2} (vs effective degree)",
                        mode,
                        studies::loglog_slope(&ns_raw, &counts),
                        studies::loglog_slope(&ns_eff, &counts),
                    );
                }
            }
            if let Some(path) = out {
                std::fs::create_dir_all(path)?;
                studies::bench_csv(*dim, &rows).write(&path.join("bench.csv"))?;
                println!("wrote {}", path.join("bench.csv").display());
            }
            Ok(())
        })(),
        Command::Coeffs {
            n,
            m,
            dim,
            out,
            dump_operators,
        } => (|| {
            let table = studies::coeffs_csv(&[(*n, *m)], *dim)?;
            let eigs = bbwadg::bernstein::eigenvalue_table(n + m, *dim)?;
            let c = bbwadg::poly::projection_coeffs(*n, *m, &eigs)?;
            let formatted: Vec<String> = c.iter().map(|v| format!("{v:.4}")).collect();
            println!("N={n} M={m} d={dim}: c = [{}]", formatted.join(", "));
            if let Some(path) = out {
                std::fs::create_dir_all(path)?;
                table.write(&path.join("coeffs.csv"))?;
                println!("wrote {}", path.join("coeffs.csv").display());
                if *dump_operators {
                    let ops = bbwadg::kernels::RefOperators::new(*n, *dim)?;
                    for (i, d) in ops.tables.deriv_bary.iter().enumerate() {
                        std::fs::write(path.join(format!("deriv_bary_{i}.coo")), d.dump_coo())?;
                    }
                    let elev = bbwadg::bernstein::elevation_matrix(*n, *dim);
                    std::fs::write(path.join("elevation.coo"), elev.dump_coo())?;
                    std::fs::write(path.join("lift_kernel.coo"), ops.lift.l0.dump_coo())?;
                    println!("wrote operator dumps in {}", path.display());
                }
            }
            Ok(())
        })(),
        Command::Roundoff { n_max, dim, out } => (|| {
            let table = studies::roundoff_csv(*n_max, *dim)?;
            print!("{}", table.to_string());
            if let Some(path) = out {
                std::fs::create_dir_all(path)?;
                table.write(&path.join("roundoff.csv"))?;
                println!("wrote {}", path.join("roundoff.csv").display());
            }
            Ok(())
        })(),
        Command::ProjectCheck {
            n_max,
            m_max,
            trials,
            seed,
            out,
        } => (|| {
            let worst =
                studies::oracle_equivalence_battery(&[2, 3], *n_max, *m_max, *trials, *seed)?;
            let pass = worst <= 1e-10;
            println!(
                "fast vs quadrature equivalence (N <= {n_max}, M <= {m_max}, d = 2,3): \
                 worst {} -> {}",
                fmt_f64(worst),
                if pass { "PASS" } else { "FAIL" }
            );
            if let Some(path) = out {
                std::fs::create_dir_all(path)?;
                let mut t = CsvTable::new(&["check", "worst", "pass"]);
                t.push(vec![
                    "oracle_equivalence".into(),
                    fmt_f64(worst),
                    pass.to_string(),
                ]);
                t.write(&path.join("project_check.csv"))?;
            }
            if pass {
                Ok(())
            } else {
                Err("equivalence check failed".into())
            }
        })(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
