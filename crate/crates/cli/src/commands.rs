use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use gdpmeans::dataio::{self, CsvOptions, DataError, Dataset};
use gdpmeans::experiment::{self, sweep, BetaGrid, ExperimentError, FKind, QuantizeConfig, SweepConfig};
use gdpmeans::influence::{self, RobustnessClass};
use gdpmeans::{fit, metrics, ClusteringConfig, Divergence, Error, Execution, FSpec, Generator};

use crate::{ClusterArgs, DataOpts, FArg, InfluenceArgs, QuantizeArgs, SweepArgs};

type Result<T> = std::result::Result<T, Error>;

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_error(path))?))
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}").map_err(io_error(path))?;
            w.flush().map_err(io_error(path))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load(opts: &DataOpts) -> Result<Dataset> {
    let label_map = opts.label_map.as_ref().map(dataio::load_label_map).transpose()?;
    let ds = dataio::load_csv(
        &opts.input,
        &CsvOptions {
            label: opts.label.clone(),
            label_map,
        },
    )?;
    Ok(if opts.standardize {
        dataio::standardize(&ds)?
    } else {
        ds
    })
}

#[derive(Serialize)]
struct RunMeta {
    f: FSpec,
    divergence: Divergence,
    lambda: f64,
    effective_beta: Option<f64>,
    n: usize,
    dims: usize,
    dropped_rows: usize,
    standardized: bool,
}

#[derive(Serialize)]
struct ClusterOutput {
    k: usize,
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    objective: f64,
    avg_distortion: f64,
    max_distortion: f64,
    nmi: Option<f64>,
    iterations: usize,
    converged: bool,
    overlap_shifts: usize,
    newton_failures: usize,
    metadata: RunMeta,
}

pub fn cluster(args: &ClusterArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let dims = ds.data.cols();
    let (f, beta) = args.f.spec(dims);
    let div = args.div.divergence();
    let mut cfg = ClusteringConfig::for_f(args.lambda, &f);
    if let Some(d) = args.delta {
        cfg = cfg.with_delta(d);
    }
    let r = fit(&f, &div, &ds.data, &cfg)?;
    let nmi = ds
        .true_labels
        .as_ref()
        .map(|t| metrics::nmi(&r.state.labels, t))
        .transpose()?;
    let out = ClusterOutput {
        k: r.state.k(),
        labels: r.state.labels,
        centers: r.state.centers,
        objective: r.objective,
        avg_distortion: r.avg_distortion,
        max_distortion: r.max_distortion,
        nmi,
        iterations: r.iterations,
        converged: r.converged,
        overlap_shifts: r.overlap_shifts,
        newton_failures: r.newton_failures,
        metadata: RunMeta {
            f,
            divergence: div,
            lambda: args.lambda,
            effective_beta: if args.f.beta_star.is_some() { beta } else { None },
            n: ds.data.rows(),
            dims,
            dropped_rows: ds.dropped_rows,
            standardized: args.data.standardize,
        },
    };
    let path = args.out_dir.as_ref().map(|d| d.join("cluster.json"));
    write_json(&out, path.as_deref())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let ds = load(&args.data)?;
    let betas = match args.beta {
        Some(b) => vec![b],
        None => BetaGrid {
            min: args.beta_min,
            max: args.beta_max,
            step: args.beta_step,
        }
        .values(),
    };
    let f_kind = match args.f {
        FArg::Pow => FKind::PowerMean,
        FArg::Lse => FKind::LogSumExp,
        FArg::Linear => {
            return Err(ExperimentError::InvalidConfig("sweeps need --f pow or --f lse".into()).into())
        }
    };
    let mut cfg = SweepConfig::new(betas, f_kind, args.div.divergence());
    cfg.a = args.a;
    cfg.lambda_decay = args.lambda_decay;
    cfg.n_shuffles = if args.paper_scale { 100 } else { args.shuffles };
    cfg.seed = args.seed;
    cfg.k_cap_multiplier = args.k_cap_multiplier;
    cfg.max_lambda_steps = args.max_lambda_steps;
    cfg.initial_lambda = args.lambda;
    cfg.delta = args.delta;
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }

    let path = args.out_dir.as_ref().map(|d| d.join("sweep.csv"));
    let mut out: Box<dyn Write> = match &path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let wrap = |e: std::io::Error| Error::from(ExperimentError::Output(e));
    writeln!(out, "{}", sweep::SWEEP_CSV_HEADER).map_err(wrap)?;
    let result = experiment::run_sweep(&ds, &cfg, |cell| {
        sweep::write_sweep_row(&mut out, cell)?;
        out.flush()?;
        Ok(())
    });
    out.flush().map_err(wrap)?;
    result?;
    Ok(())
}

#[derive(Serialize)]
struct CurveReport {
    file: String,
    f: FSpec,
    divergence: Divergence,
    theta: f64,
    points: usize,
    robustness_class: Option<RobustnessClass>,
    numeric_trend: Option<RobustnessClass>,
    note: Option<String>,
}

fn default_theta(g: &Generator) -> f64 {
    match *g {
        Generator::Binomial(n) => f64::from(n) / 2.0,
        Generator::Alpha(a) if a == 0.0 => 1000.0,
        Generator::Alpha(a) if !g.real_domain() && a != 0.0 => 100.0,
        _ => 0.0,
    }
}

fn default_grid(g: &Generator, theta: f64, args: &InfluenceArgs) -> Vec<f64> {
    if let (Generator::Binomial(n), None, None) = (g, args.x_min, args.x_max) {
        return (0..=*n).map(f64::from).collect();
    }
    let (lo, hi) = if g.real_domain() {
        (theta - 10.0, theta + 10.0)
    } else {
        (theta * 1e-3, theta * 10.0)
    };
    influence::linspace(args.x_min.unwrap_or(lo), args.x_max.unwrap_or(hi), args.points)
}

fn name_token(v: f64) -> String {
    format!("{v}").replace('-', "m").replace('.', "p")
}

pub fn influence(args: &InfluenceArgs) -> Result<()> {
    let div = args.div.divergence();
    div.validate()?;
    let g = div.generator;
    let theta = args.theta.unwrap_or_else(|| default_theta(&g));
    let grid = default_grid(&g, theta, args);
    let betas: Vec<f64> = match (args.f, args.beta.is_empty()) {
        (FArg::Linear, _) => vec![1.0],
        (_, false) => args.beta.clone(),
        (FArg::Pow, true) => vec![-1.0, 0.0, 0.25, 0.5, 1.5],
        (FArg::Lse, true) => vec![-1.0, 0.0, 0.5, 1.0, 2.0],
    };
    fs::create_dir_all(&args.out_dir).map_err(io_error(&args.out_dir))?;
    let mut reports = Vec::new();
    for beta in betas {
        let f = match args.f {
            FArg::Linear => FSpec::Linear,
            FArg::Pow => FSpec::power_mean(beta, args.a),
            FArg::Lse => FSpec::log_sum_exp(beta),
        };
        f.validate()?;
        let curve = influence::influence_curve_1d(&f, &div, theta, &grid, Execution::Parallel)?;
        let fname = format!(
            "influence_{:?}_{}_beta{}.csv",
            args.f,
            g.name(),
            name_token(beta)
        )
        .to_lowercase();
        let path = args.out_dir.join(&fname);
        let mut w = create(&path)?;
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "x_star,value")?;
            for (x, v) in &curve {
                writeln!(w, "{x},{v}")?;
            }
            w.flush()
        };
        write().map_err(io_error(&path))?;

        let (class, note) = match influence::classify_robustness(&f, &div) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let numeric = if matches!(g, Generator::Binomial(_)) {
            None
        } else {
            influence::trace_robustness(&f, &div, theta).ok()
        };
        reports.push(CurveReport {
            file: fname,
            f,
            divergence: div,
            theta,
            points: curve.len(),
            robustness_class: class,
            numeric_trend: numeric,
            note,
        });
    }
    write_json(&reports, Some(&args.out_dir.join("influence_report.json")))
}

pub fn quantize(args: &QuantizeArgs) -> Result<()> {
    let img = dataio::read_ppm(&args.image)?;
    let (f, _) = args.f.spec(dataio::BLOCK_DIMS);
    let mut cfg = QuantizeConfig::new(f, args.lambda);
    cfg.standardize = args.standardize;
    cfg.seed = args.seed;
    cfg.delta = args.delta;
    let mut r = experiment::quantize(&img, &cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(io_error(&args.out_dir))?;
    if let Some(out) = r.image.take() {
        dataio::write_ppm(args.out_dir.join("quantized.ppm"), &out)?;
    }
    #[derive(Serialize)]
    struct Stats<'a> {
        #[serde(flatten)]
        result: &'a experiment::QuantizeResult,
        compression_ratio_percent: String,
        f: FSpec,
        lambda: f64,
    }
    let stats = Stats {
        result: &r,
        compression_ratio_percent: format!("{:.2}", r.compression_ratio),
        f,
        lambda: args.lambda,
    };
    write_json(&stats, Some(&args.out_dir.join("stats.json")))
}
