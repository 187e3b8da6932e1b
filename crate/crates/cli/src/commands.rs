//! One function per subcommand.

use std::io::Write;
use std::path::{Path, PathBuf};

use spcrit::acceptance::{run_all, CriterionOutcome};
use spcrit::loglaplace::{kolmogorov_table, yaglom_transform};
use spcrit::moments::variance;
use spcrit::montecarlo::{simulate_paths, SimConfig};
use spcrit::spectral::{log_grid, nu, spectral_data, tilde_projection};
use spcrit::{Field, Measure, Model};

use crate::error::CliError;
use crate::input::{parse_field, parse_grid, parse_measure, read_model};
use crate::output::{header, num, Table};

/// Times at which `validate` checks `Σ_x m(x) p(t, x, y) <= 1`.
fn dual_grid() -> Vec<f64> {
    log_grid(0.01, 100.0, 41)
}

pub fn validate(model_path: &Path) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let dual = model.check_dual_submarkov(&dual_grid())?;
    let grey = model.check_grey_domination();
    let k = model.derived_coefficients().k_bound;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "states,{}", model.len());
    let _ = writeln!(out, "K,{}", num(k));
    let _ = writeln!(out, "dual_submarkov,{}", dual.satisfied);
    let _ = writeln!(out, "grey_certified,{}", grey.satisfied);
    let _ = writeln!(out, "b_tilde,{}", num(grey.b_tilde));
    if !grey.satisfied {
        eprintln!(
            "warning: min beta*b = 0, so almost-sure extinction is not certified; \
             extinction probabilities rely on the numerical ladder"
        );
    }
    if !dual.satisfied {
        return Err(CliError::Rejected(format!(
            "dual semigroup is not sub-Markov: excess {:e} at t = {}, state {}",
            dual.worst_excess,
            dual.worst_time,
            model.space().labels()[dual.worst_state]
        )));
    }
    Ok(())
}

pub fn spectral(model_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let s = spectral_data(&model)?;
    s.require_critical()?;
    let nu = nu(&model, &s)?;
    let mut table = Table::create(
        out,
        &header(&["state", "phi0", "psi0", "lambda0", "gamma", "nu", "c_expansion"]),
    )?;
    for (x, label) in model.space().labels().iter().enumerate() {
        table.row(&[
            label.clone(),
            num(s.phi0.0[x]),
            num(s.psi0.0[x]),
            num(s.lambda0),
            num(s.gamma),
            num(nu),
            num(s.c_expansion),
        ])?;
    }
    table.finish()
}

pub fn kolmogorov(
    model_path: &Path,
    mu: &str,
    grid: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let mu = parse_measure(mu, &model)?;
    let grid = parse_grid(grid)?;
    let s = spectral_data(&model)?;
    warn_grey(&model);
    let rows = kolmogorov_table(&model, &s, &mu, &grid)?;
    let mut table = Table::create(out, &header(&["t", "survival", "t_times_survival", "limit"]))?;
    for r in rows {
        table.row(&[num(r.t), num(r.survival), num(r.scaled), num(r.limit)])?;
    }
    table.finish()
}

pub fn yaglom(
    model_path: &Path,
    f: &str,
    lambda: f64,
    t: f64,
    mu: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let f = parse_field(f, &model)?;
    let mu = match mu {
        Some(raw) => parse_measure(raw, &model)?,
        None => Measure::dirac(model.len(), 0, 1.0),
    };
    let s = spectral_data(&model)?;
    warn_grey(&model);
    let y = yaglom_transform(&model, &s, &mu, &f, lambda, t)?;
    let mut table = Table::create(out, &header(&["lambda", "t", "value", "target"]))?;
    table.row(&[num(lambda), num(t), num(y.value), num(y.target)])?;
    table.finish()
}

pub fn moments(
    model_path: &Path,
    f: &str,
    t: f64,
    mu: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let f = parse_field(f, &model)?;
    let mu = parse_measure(mu, &model)?;
    let r = variance(&model, &f, t, &mu)?;
    let mut table = Table::create(
        out,
        &header(&["t", "mean", "variance", "second_moment", "variance_bound"]),
    )?;
    table.row(&[num(t), num(r.mean), num(r.variance), num(r.second_moment), num(r.bound)])?;
    table.finish()
}

pub struct SimulateArgs {
    pub model: PathBuf,
    pub mu: String,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub f: String,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let mu = parse_measure(&args.mu, &model)?;
    let f = parse_field(&args.f, &model)?;
    let cfg = SimConfig::new(args.t, args.dt, args.paths, args.seed);
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| CliError::io(p, e))?,
        )),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    };
    let survivors = write_simulation(&model, &mu, &f, &cfg, args.threads, sink)?;
    eprintln!("{survivors} of {} paths survived to t = {}", args.paths, args.t);
    Ok(())
}

fn with_threads<R: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> R + Send,
) -> Result<R, CliError> {
    match threads {
        None => Ok(job()),
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Simulates and writes one CSV row per path; returns the survivor count.
pub fn write_simulation(
    model: &Model,
    mu: &Measure,
    f: &Field,
    cfg: &SimConfig,
    threads: Option<usize>,
    sink: Box<dyn Write>,
) -> Result<usize, CliError> {
    let s = spectral_data(model)?;
    let ensemble = with_threads(threads, || simulate_paths(model, mu, cfg))??;
    let f_tilde = tilde_projection(f, &s);
    let mut cols = header(&["path_id", "survived"]);
    cols.extend(model.space().labels().iter().map(|l| format!("mass_{l}")));
    cols.extend(header(&["V", "Z"]));
    let mut table = Table::from_writer(sink, &cols)?;
    let t = cfg.t_end;
    for p in 0..ensemble.n_paths() {
        let row = ensemble.row(p);
        let pair = |g: &Field| -> f64 { row.iter().zip(g.0.iter()).map(|(x, y)| x * y).sum() };
        let mut cells = vec![p.to_string(), u8::from(ensemble.survived[p]).to_string()];
        cells.extend(row.iter().map(|&x| num(x)));
        cells.push(num(pair(&s.phi0) / t));
        cells.push(num(pair(&f_tilde) / t.sqrt()));
        table.row(&cells)?;
    }
    table.finish()?;
    Ok(ensemble.survivors())
}

fn warn_grey(model: &Model) {
    if !model.check_grey_domination().satisfied {
        eprintln!("warning: almost-sure extinction is not certified for this model (min beta*b = 0)");
    }
}

/// Renders a small simulation twice on one thread and once on several and
/// compares the bytes.
pub fn determinism_check() -> CriterionOutcome {
    let start = std::time::Instant::now();
    let model = spcrit::reference::symmetric_pair();
    let mu = Measure::dirac(2, 0, 1.0);
    let f = Field::from_slice(&[1.0, -1.0]);
    let cfg = SimConfig::new(5.0, 0.01, 2000, 42);
    let render = |threads: usize| -> Result<Vec<u8>, CliError> {
        let buffer = SharedBuffer::default();
        write_simulation(&model, &mu, &f, &cfg, Some(threads), Box::new(buffer.clone()))?;
        Ok(buffer.take())
    };
    let (passed, detail) = match (render(1), render(1), render(4)) {
        (Ok(a), Ok(b), Ok(c)) => (
            a == b && a == c,
            format!("{} bytes; repeat identical: {}, 4 threads identical: {}", a.len(), a == b, a == c),
        ),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => (false, format!("error: {e}")),
    };
    CriterionOutcome {
        id: 9,
        name: "determinism",
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: std::time::Duration::from_secs(60),
    }
}

#[derive(Clone, Default)]
struct SharedBuffer(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);

impl SharedBuffer {
    fn take(&self) -> Vec<u8> {
        std::mem::take(&mut self.0.lock().expect("buffer lock"))
    }
}

impl Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().expect("buffer lock").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub fn verify(model_path: &Path, fast: bool) -> Result<(), CliError> {
    let model = read_model(model_path)?;
    let s = spectral_data(&model)?;
    println!(
        "model {}: {} states, lambda0 = {:e}, critical = {}",
        model_path.display(),
        model.len(),
        s.lambda0,
        s.is_critical()
    );
    let mut outcomes = run_all(fast);
    outcomes.push(determinism_check());
    let mut failed = 0;
    for o in &outcomes {
        println!("{}", o.line());
        if !(o.passed && o.within_budget()) {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Acceptance(failed));
    }
    Ok(())
}
