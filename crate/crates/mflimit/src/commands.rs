//! The four subcommands. Each writes one run directory below `--out`:
//! `train/`, `meanfield/`, `verify/` or `mnist/`.

use std::path::{Path, PathBuf};

use mflimit_core::data::{sample_init_measure, DataStream};
use mflimit_core::diagnostics::criteria::{self, Verdict};
use mflimit_core::diagnostics::{chaos_test, lln_decay, limit_distance, martingale_decay, Estimate, MartingaleSetup, ReplicaStudy, StudyRuns};
use mflimit_core::measure::{histogram, Histogram1D, Selector};
use mflimit_core::meanfield::{picard_iterate, solve_selfconsistent, weak_residual, MeanFieldSolution};
use mflimit_core::sgd::{train_partial, Snapshot, Trajectory};
use mflimit_core::transport::wasserstein_1d;
use mflimit_core::{DataModel, EmpiricalMeasure, Ensemble, Error, RandomnessContract, TestFunction};

use crate::artifacts::{header, num, snapshot_header, RunReader, RunWriter};
use crate::config::{ExperimentConfig, ModelSpec, Solver};
use crate::error::{CliError, Result};
use crate::pool::Pool;

/// Stream of the mean-field initial cloud and quadrature nodes; training
/// replica `r` uses stream `r`.
pub const MEANFIELD_STREAM: u64 = 1 << 32;
/// Stream of every bootstrap and resampling draw made by `verify`.
pub const VERIFY_STREAM: u64 = (1 << 32) + 1;

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>) -> Self {
        Self { config, out: out.into(), quiet: true }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn pool(&self) -> Result<Pool> {
        Pool::new(self.config.workers)
    }

    pub fn train_dir(&self) -> PathBuf {
        self.out.join("train")
    }

    pub fn meanfield_dir(&self) -> PathBuf {
        self.out.join("meanfield")
    }

    pub fn verify_dir(&self) -> PathBuf {
        self.out.join("verify")
    }

    pub fn mnist_dir(&self) -> PathBuf {
        self.out.join("mnist")
    }
}

fn run_dir(n: usize, replica: usize) -> String {
    format!("n{n}/r{replica:03}")
}

fn snapshot_file(n: usize, replica: usize, index: usize) -> String {
    format!("{}/snapshot_{index:02}.csv", run_dir(n, replica))
}

fn measure_rows(mu: &EmpiricalMeasure) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..mu.len()).map(move |i| std::iter::once(num(mu.c()[i])).chain(mu.w_of(i).iter().map(|&v| num(v))).collect())
}

fn histogram_rows(h: &Histogram1D) -> Vec<Vec<String>> {
    h.counts.iter().enumerate().map(|(k, &c)| vec![num(h.edges[k]), num(h.edges[k + 1]), c.to_string()]).collect()
}

fn estimate_cells(e: &Estimate) -> [String; 4] {
    [num(e.value), num(e.se), num(e.lo), num(e.hi)]
}

fn estimate_header(prefix: &str) -> [String; 4] {
    [prefix.to_string(), format!("{prefix}_se"), format!("{prefix}_lo"), format!("{prefix}_hi")]
}

/// Function used by the martingale table: an off-centre Gaussian bump in
/// `(c, w)`. Symmetric choices such as `f = c` make the leading fluctuation
/// cancel under the odd activation and symmetric initial law.
pub fn martingale_function(dim: usize) -> TestFunction {
    let mut center = vec![0.5, 1.0, -0.5];
    center.resize(1 + dim, 0.0);
    TestFunction::GaussianBump { center, width: 1.0, amplitude: 1.0 }
}

fn diverged_detail(n: usize, replica: usize, err: &Error) -> String {
    match err {
        Error::Diverged { step, magnitude } => format!("n={n}\nreplica={replica}\nstep={step}\nmagnitude={magnitude:e}"),
        other => format!("n={n}\nreplica={replica}\nerror={other}"),
    }
}

/// SGD runs for every N of the grid and every replica: snapshots, initial
/// and final histograms of `c`, and the moment-guard trace.
pub fn cmd_train(ctx: &Context) -> Result<PathBuf> {
    let cfg = &ctx.config;
    let model = cfg.data_model()?;
    let init = cfg.init_law(model.dim);
    let schedule = cfg.schedule();
    let pool = ctx.pool()?;
    let reps = cfg.replicas;
    ctx.say(format!("train: N in {:?}, {reps} replicas, {} workers", cfg.n_grid, pool.workers()));
    let results = mflimit_core::diagnostics::Executor::map(&pool, cfg.n_grid.len() * reps, |j| -> Result<(Trajectory, Option<Error>)> {
        let (n, r) = (cfg.n_grid[j / reps], j % reps);
        let contract = RandomnessContract::new(cfg.seed, r as u64);
        let mut ens = Ensemble::new(sample_init_measure(&init, contract, n)?, cfg.alpha, cfg.activation)?;
        let mut stream = DataStream::new(&model, contract);
        Ok(train_partial(&mut ens, &mut stream, &schedule)?)
    });
    let mut w = RunWriter::create(&ctx.train_dir(), &cfg.hash(), cfg.seed)?;
    w.text("config.txt", &cfg.canonical())?;
    let mut moments = Vec::new();
    let mut summary = Vec::new();
    let mut first_failure: Option<Error> = None;
    for (j, res) in results.into_iter().enumerate() {
        let (n, r) = (cfg.n_grid[j / reps], j % reps);
        let (traj, err) = res?;
        for (i, s) in traj.snapshots.iter().enumerate() {
            let meta = [("n", n.to_string()), ("replica", r.to_string()), ("time", num(s.time)), ("step", s.step.to_string()), ("moment_guard", num(s.moment_guard))];
            w.table(&snapshot_file(n, r, i), &snapshot_header(model.dim), measure_rows(&s.measure), &meta)?;
            moments.push(vec![n.to_string(), r.to_string(), num(s.time), s.step.to_string(), num(s.moment_guard)]);
        }
        let hist_meta = |stage: &str| [("n", n.to_string()), ("replica", r.to_string()), ("stage", stage.to_string()), ("selector", "c".to_string())];
        if let (Some(a), Some(b)) = (traj.snapshots.first(), traj.snapshots.last()) {
            w.table(&format!("{}/hist_c_initial.csv", run_dir(n, r)), &header(&["edge_lo", "edge_hi", "count"]), histogram_rows(&histogram(&a.measure, Selector::C, cfg.bins)?), &hist_meta("initial"))?;
            w.table(&format!("{}/hist_c_final.csv", run_dir(n, r)), &header(&["edge_lo", "edge_hi", "count"]), histogram_rows(&histogram(&b.measure, Selector::C, cfg.bins)?), &hist_meta("final"))?;
        }
        summary.push(vec![n.to_string(), r.to_string(), traj.steps.to_string(), num(traj.max_moment_guard), u8::from(err.is_some()).to_string()]);
        if let Some(e) = err {
            ctx.say(format!("train: N={n} replica {r} diverged: {e}"));
            if first_failure.is_none() {
                w.diverged(&diverged_detail(n, r, &e))?;
                first_failure = Some(e);
            }
        }
    }
    w.table("moments.csv", &header(&["n", "replica", "time", "step", "moment_guard"]), moments, &[])?;
    w.table("runs.csv", &header(&["n", "replica", "steps", "max_moment_guard", "diverged"]), summary, &[])?;
    let dir = w.finish("train", &[("n_grid", join(&cfg.n_grid)), ("replicas", reps.to_string()), ("streams", format!("0..{reps}"))])?;
    match first_failure {
        Some(source) => Err(CliError::Diverged { dir, source }),
        None => {
            ctx.say(format!("train: wrote {}", dir.display()));
            Ok(dir)
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Mean-field solution slices plus the weak-residual report. With the
/// Picard solver the distance sequence is written as well, also when the
/// iteration fails to converge.
pub fn cmd_meanfield(ctx: &Context) -> Result<PathBuf> {
    let cfg = &ctx.config;
    let model = cfg.data_model()?;
    let init = cfg.init_law(model.dim);
    let mf = cfg.meanfield();
    let contract = RandomnessContract::new(cfg.seed, MEANFIELD_STREAM);
    let mut w = RunWriter::create(&ctx.meanfield_dir(), &cfg.hash(), cfg.seed)?;
    w.text("config.txt", &cfg.canonical())?;
    ctx.say(format!("meanfield: M={}, dt={}, {} nodes, {} Euler steps", mf.particles, mf.dt, mf.quadrature.nodes, mf.steps()));
    let (solution, distances) = match cfg.solver {
        Solver::SelfConsistent => match solve_selfconsistent(&init, &model, &mf, contract) {
            Ok(s) => (s, None),
            Err(e) => return Err(meanfield_failure(w, e)),
        },
        Solver::Picard { tol, max_iters } => {
            let m0 = MeanFieldSolution::frozen(sample_init_measure(&init, contract, mf.particles)?, mf, contract)?;
            match picard_iterate(&m0, &model, tol, max_iters) {
                Ok(rep) => (rep.solution, Some(rep.distances)),
                Err(e) => {
                    if let Error::NonConvergence { distances, .. } = &e {
                        write_distances(&mut w, distances)?;
                    }
                    return Err(meanfield_failure(w, e));
                }
            }
        }
    };
    if let Some(d) = &distances {
        write_distances(&mut w, d)?;
    }
    for (s, slice) in solution.slices.iter().enumerate() {
        let meta = [("time", num(solution.times[s])), ("step", solution.slice_steps[s].to_string())];
        w.table(&format!("slice_{s:04}.csv"), &snapshot_header(model.dim), measure_rows(slice), &meta)?;
    }
    let mut rows = Vec::new();
    for (name, f) in TestFunction::standard_set(model.dim) {
        let r = weak_residual(&solution, &f, &model, &mf.quadrature, contract, solution.slices.len())?;
        rows.push(vec![name, num(r.residual), num(r.magnitude), num(r.relative), num(r.increment)]);
    }
    w.table("residual.csv", &header(&["function", "residual", "magnitude", "relative", "increment"]), rows, &[])?;
    let q = mf.quadrature;
    let extra = [
        ("solver", format!("{:?}", cfg.solver)),
        ("particles", mf.particles.to_string()),
        ("dt", num(mf.dt)),
        ("steps", mf.steps().to_string()),
        ("record_every", mf.record_every.to_string()),
        ("slices", solution.slices.len().to_string()),
        ("quadrature", format!("{:?}:{}:{:?}", q.mode, q.nodes, q.refresh)),
        ("stream", contract.stream.to_string()),
    ];
    let dir = w.finish("meanfield", &extra)?;
    ctx.say(format!("meanfield: wrote {}", dir.display()));
    Ok(dir)
}

fn write_distances(w: &mut RunWriter, d: &[f64]) -> Result<()> {
    let rows = d.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), num(*v)]);
    w.table("picard.csv", &header(&["iteration", "distance"]), rows, &[])
}

fn meanfield_failure(mut w: RunWriter, e: Error) -> CliError {
    if let Error::Diverged { step, magnitude } = &e {
        if let Err(io) = w.diverged(&format!("step={step}\nmagnitude={magnitude:e}")) {
            return io;
        }
    }
    match w.finish("meanfield", &[]) {
        Ok(dir) if matches!(e, Error::Diverged { .. }) => CliError::Diverged { dir, source: e },
        Ok(_) => CliError::Core(e),
        Err(io) => io,
    }
}

/// Reloads a finished `train` run into study form.
pub fn load_train(ctx: &Context) -> Result<StudyRuns> {
    let cfg = &ctx.config;
    let dir = ctx.train_dir();
    let reader = RunReader::open(&dir, &cfg.hash(), "train")?;
    if reader.exists(crate::artifacts::DIVERGED) {
        return Err(CliError::Config(format!("the train run in {} diverged; nothing to verify", dir.display())));
    }
    let model = cfg.data_model()?;
    let dim = model.dim;
    let summary = reader.numeric("runs.csv", &header(&["n", "replica", "steps", "max_moment_guard", "diverged"]))?;
    let moments = reader.numeric("moments.csv", &header(&["n", "replica", "time", "step", "moment_guard"]))?;
    let schedule = cfg.schedule();
    let reps = cfg.replicas;
    let mut runs = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let mut per_n = Vec::with_capacity(reps);
        for r in 0..reps {
            let row = summary.iter().find(|row| row[0] as usize == n && row[1] as usize == r).ok_or_else(|| CliError::MissingArtifact { path: dir.join("runs.csv"), command: "train" })?;
            let marks: Vec<&Vec<f64>> = moments.iter().filter(|m| m[0] as usize == n && m[1] as usize == r).collect();
            let mut snapshots = Vec::with_capacity(marks.len());
            for (i, m) in marks.iter().enumerate() {
                let cells = reader.numeric(&snapshot_file(n, r, i), &snapshot_header(dim))?;
                let c = cells.iter().map(|row| row[0]).collect();
                let w = cells.iter().flat_map(|row| row[1..].iter().copied()).collect();
                snapshots.push(Snapshot { time: m[2], step: m[3] as u64, measure: EmpiricalMeasure::new(dim, c, w)?, moment_guard: m[4] });
            }
            per_n.push(Trajectory { snapshots, max_moment_guard: row[3], steps: row[2] as u64 });
        }
        runs.push(per_n);
    }
    let study = ReplicaStudy { model, init: cfg.init_law(dim), activation: cfg.activation, alpha: cfg.alpha, schedule, n_grid: cfg.n_grid.clone(), replicas: reps, seed: cfg.seed };
    Ok(StudyRuns { study, runs })
}

/// Reloads a finished `meanfield` run.
pub fn load_meanfield(ctx: &Context) -> Result<MeanFieldSolution> {
    let cfg = &ctx.config;
    let reader = RunReader::open(&ctx.meanfield_dir(), &cfg.hash(), "meanfield")?;
    let dim = cfg.data_model()?.dim;
    let count: usize = reader.manifest("slices").and_then(|s| s.parse().ok()).ok_or_else(|| CliError::MissingArtifact { path: ctx.meanfield_dir().join("manifest.txt"), command: "meanfield" })?;
    let (mut times, mut slices, mut steps) = (Vec::new(), Vec::new(), Vec::new());
    for s in 0..count {
        let rel = format!("slice_{s:04}.csv");
        let meta = reader.meta(&rel)?;
        let cells = reader.numeric(&rel, &snapshot_header(dim))?;
        let c = cells.iter().map(|row| row[0]).collect();
        let w = cells.iter().flat_map(|row| row[1..].iter().copied()).collect();
        slices.push(EmpiricalMeasure::new(dim, c, w)?);
        let parse = |k: &str| meta.get(k).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| CliError::Format { path: ctx.meanfield_dir().join(format!("{rel}.meta")), offset: 0, message: format!("missing `{k}`") });
        times.push(parse("time")?);
        steps.push(parse("step")? as usize);
    }
    let config = cfg.meanfield();
    let config = mflimit_core::meanfield::MeanFieldConfig { particles: slices.first().map_or(config.particles, EmpiricalMeasure::len), ..config };
    Ok(MeanFieldSolution { times, slices, slice_steps: steps, config, contract: RandomnessContract::new(cfg.seed, MEANFIELD_STREAM) })
}

/// Outcome of `verify`: one verdict per criterion it covers.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub verdicts: Vec<Verdict>,
    pub dir: PathBuf,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn text(&self) -> String {
        self.verdicts.iter().map(|v| v.line() + "\n").collect()
    }
}

/// Checks the train and meanfield artifacts of `ctx.out` against the
/// variance-decay, martingale, weak-residual, limit-distance, chaos and
/// moment criteria. The martingale table needs its own runs and is
/// computed here.
pub fn cmd_verify(ctx: &Context) -> Result<VerifyReport> {
    let cfg = &ctx.config;
    let runs = load_train(ctx)?;
    let solution = load_meanfield(ctx)?;
    let model = runs.study.model.clone();
    let dim = model.dim;
    let boot = RandomnessContract::new(cfg.seed, VERIFY_STREAM);
    let pool = ctx.pool()?;
    let fs = TestFunction::standard_set(dim);
    let mut w = RunWriter::create(&ctx.verify_dir(), &cfg.hash(), cfg.seed)?;
    let mut verdicts = Vec::new();

    ctx.say("verify: variance decay");
    let lln_runs = StudyRuns { study: ReplicaStudy { replicas: cfg.lln_replicas, ..runs.study.clone() }, runs: runs.runs.iter().map(|r| r[..cfg.lln_replicas].to_vec()).collect() };
    let mut tables = Vec::new();
    let mut rows = Vec::new();
    for (name, f) in &fs {
        let t = lln_decay(&lln_runs, f, boot)?;
        for row in &t.rows {
            rows.push([vec![name.clone(), row.n.to_string()], estimate_cells(&row.mean).to_vec(), estimate_cells(&row.std).to_vec()].concat());
        }
        tables.push((name.clone(), t));
    }
    w.table("lln.csv", &[vec!["function".into(), "n".into()], estimate_header("mean").to_vec(), estimate_header("std").to_vec()].concat(), rows, &[("replicas", cfg.lln_replicas.to_string())])?;
    let slope_rows = tables.iter().map(|(name, t)| {
        let cells = t.slope.map(|s| estimate_cells(&s).to_vec()).unwrap_or_else(|| vec!["nan".into(); 4]);
        [vec![name.clone()], cells].concat()
    });
    w.table("lln_slope.csv", &[vec!["function".to_string()], estimate_header("slope").to_vec()].concat(), slope_rows, &[])?;
    verdicts.push(criteria::lln(&tables));

    ctx.say("verify: martingale decay");
    let setup = MartingaleSetup { model: model.clone(), init: cfg.init_law(dim), activation: cfg.activation, alpha: cfg.alpha, horizon: cfg.horizon, nodes: cfg.martingale_nodes, seed: cfg.seed };
    let mrows = martingale_decay(&setup, &martingale_function(dim), &cfg.martingale_grid, cfg.martingale_replicas, &pool)?;
    let cells = mrows.iter().map(|r| [vec![r.n.to_string()], estimate_cells(&r.m1_sq).to_vec(), estimate_cells(&r.m2_sq).to_vec(), estimate_cells(&r.qv1).to_vec(), estimate_cells(&r.qv2).to_vec(), vec![num(r.max_remainder), num(r.max_identity_error)]].concat());
    let mh = [vec!["n".to_string()], estimate_header("m1_sq").to_vec(), estimate_header("m2_sq").to_vec(), estimate_header("qv1").to_vec(), estimate_header("qv2").to_vec(), vec!["max_remainder".into(), "max_identity_error".into()]].concat();
    w.table("martingale.csv", &mh, cells, &[("replicas", cfg.martingale_replicas.to_string()), ("nodes", cfg.martingale_nodes.to_string())])?;
    verdicts.push(criteria::martingale(&mrows));

    ctx.say("verify: weak residual");
    let mut residuals = Vec::new();
    for (name, f) in &fs {
        residuals.push((name.clone(), weak_residual(&solution, f, &model, &solution.config.quadrature, solution.contract, solution.slices.len())?));
    }
    let rr = residuals.iter().map(|(n, r)| vec![n.clone(), num(r.residual), num(r.magnitude), num(r.relative), num(r.increment)]);
    w.table("residual.csv", &header(&["function", "residual", "magnitude", "relative", "increment"]), rr, &[])?;
    verdicts.push(criteria::residual(&residuals));

    ctx.say("verify: distance to the limit");
    let f_only: Vec<TestFunction> = fs.iter().map(|(_, f)| f.clone()).collect();
    let names: Vec<String> = fs.iter().map(|(n, _)| n.clone()).collect();
    let lrows = limit_distance(&runs, &solution, &f_only, boot)?;
    let mut cells = Vec::new();
    for r in &lrows {
        for (fi, name) in names.iter().enumerate() {
            cells.push([vec![r.n.to_string(), num(r.time), name.clone()], estimate_cells(&r.gaps[fi]).to_vec(), vec![num(r.floors[fi])], estimate_cells(&r.wasserstein).to_vec()].concat());
        }
    }
    let lh = [header(&["n", "time", "function"]), estimate_header("gap").to_vec(), vec!["floor".into()], estimate_header("w1").to_vec()].concat();
    w.table("limit.csv", &lh, cells, &[])?;
    verdicts.push(criteria::limit(&lrows, &names, cfg.horizon));

    ctx.say("verify: propagation of chaos");
    let f = TestFunction::clamped_c(1);
    match chaos_test(&runs, &f, &f, boot) {
        Ok(crow) => {
            let cells = crow.iter().map(|r| [vec![r.n.to_string()], estimate_cells(&r.pair).to_vec(), estimate_cells(&r.pooled).to_vec()].concat());
            w.table("chaos.csv", &[vec!["n".to_string()], estimate_header("pair_cov").to_vec(), estimate_header("pooled_cov").to_vec()].concat(), cells, &[("replicas", cfg.replicas.to_string())])?;
            verdicts.push(criteria::chaos(&crow));
        }
        // Too few replicas is a failed check, not a broken run.
        Err(Error::Config(why)) => verdicts.push(Verdict { id: 5, name: "propagation of chaos", pass: false, detail: why }),
        Err(e) => return Err(e.into()),
    }

    let bounds = moment_bounds(&runs);
    let cells = cfg.n_grid.iter().zip(&bounds).map(|(n, b)| vec![n.to_string(), num(*b)]);
    w.table("moments.csv", &header(&["n", "mean_max_moment_guard"]), cells, &[])?;
    verdicts.push(criteria::moment(&cfg.n_grid, &bounds));

    let report = VerifyReport { verdicts, dir: w.dir().to_path_buf() };
    w.text("report.txt", &report.text())?;
    w.finish("verify", &[("passed", report.passed().to_string())])?;
    Ok(report)
}

/// Replica mean of `max_t (1/N) sum (|c| + |w|)` for each N.
pub fn moment_bounds(runs: &StudyRuns) -> Vec<f64> {
    runs.runs.iter().map(|per_n| per_n.iter().map(|t| t.max_moment_guard).sum::<f64>() / per_n.len() as f64).collect()
}

#[derive(Debug, Clone)]
pub struct MnistReport {
    pub n_grid: Vec<usize>,
    pub histograms: Vec<Histogram1D>,
    /// `W_1` between the output-weight samples of successive sizes.
    pub distances: Vec<f64>,
    pub verdict: Verdict,
    pub dir: PathBuf,
}

/// Trains one network per N on the digit pair and writes the histogram of
/// the output weights `c` at `T`, plus `W_1` between successive sizes.
pub fn cmd_mnist_hist(ctx: &Context) -> Result<MnistReport> {
    let cfg = &ctx.config;
    if !matches!(cfg.model, ModelSpec::Mnist { .. }) {
        return Err(CliError::Config("mnist-hist needs `model = mnist` with `mnist_images`, `mnist_labels` and `digits`".into()));
    }
    let model = cfg.data_model()?;
    mnist_hist_with(ctx, &model)
}

/// [`cmd_mnist_hist`] on an already loaded data law.
pub fn mnist_hist_with(ctx: &Context, model: &DataModel) -> Result<MnistReport> {
    let cfg = &ctx.config;
    let init = cfg.init_law(model.dim);
    let schedule = mflimit_core::TrainSchedule { horizon: cfg.horizon, snapshot_times: vec![cfg.horizon] };
    let pool = ctx.pool()?;
    ctx.say(format!("mnist-hist: {} samples of dimension {}, N in {:?}", model.dataset().map_or(0, |d| d.len()), model.dim, cfg.n_grid));
    let contract = RandomnessContract::new(cfg.seed, 0);
    let finals = mflimit_core::diagnostics::Executor::map(&pool, cfg.n_grid.len(), |g| -> Result<(EmpiricalMeasure, Option<Error>)> {
        let mut ens = Ensemble::new(sample_init_measure(&init, contract, cfg.n_grid[g])?, cfg.alpha, cfg.activation)?;
        let mut stream = DataStream::new(model, contract);
        let (_, err) = train_partial(&mut ens, &mut stream, &schedule)?;
        Ok((ens.into_measure(), err))
    });
    let mut w = RunWriter::create(&ctx.mnist_dir(), &cfg.hash(), cfg.seed)?;
    w.text("config.txt", &cfg.canonical())?;
    let mut measures = Vec::new();
    for (g, res) in finals.into_iter().enumerate() {
        let (mu, err) = res?;
        if let Some(e) = err {
            w.diverged(&diverged_detail(cfg.n_grid[g], 0, &e))?;
            let dir = w.finish("mnist-hist", &[])?;
            return Err(CliError::Diverged { dir, source: e });
        }
        measures.push(mu);
    }
    let mut histograms = Vec::new();
    for (mu, &n) in measures.iter().zip(&cfg.n_grid) {
        let h = histogram(mu, Selector::C, cfg.bins)?;
        w.table(&format!("hist_c_n{n}.csv"), &header(&["edge_lo", "edge_hi", "count"]), histogram_rows(&h), &[("n", n.to_string()), ("time", num(cfg.horizon)), ("selector", "c".into())])?;
        histograms.push(h);
    }
    let mut distances = Vec::new();
    for p in measures.windows(2) {
        distances.push(wasserstein_1d(p[0].c(), p[1].c())?);
    }
    let rows = distances.iter().enumerate().map(|(i, d)| vec![cfg.n_grid[i].to_string(), cfg.n_grid[i + 1].to_string(), num(*d)]);
    w.table("w1.csv", &header(&["n_a", "n_b", "w1"]), rows, &[])?;
    let verdict = criteria::histograms(&cfg.n_grid, &distances);
    let dir = w.finish("mnist-hist", &[("n_grid", join(&cfg.n_grid))])?;
    Ok(MnistReport { n_grid: cfg.n_grid.clone(), histograms, distances, verdict, dir })
}

/// Path of a run's DIVERGED marker, if any.
pub fn diverged_marker(dir: &Path) -> Option<PathBuf> {
    let p = dir.join(crate::artifacts::DIVERGED);
    p.exists().then_some(p)
}
