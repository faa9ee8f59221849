use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use attn_core::analysis::{batch_evaluate, category_report, frequency_audit};
use attn_core::evolution::{run_evolution_with, RunOptions};
use attn_core::genome::GenomeFile;
use attn_core::trials::handpicked::handpicked;
use attn_core::trials::{classify, generate_corpus, read_corpus, write_corpus, CorpusHeader, LabelRecord, Trial};
use attn_core::world::{run_trial, write_trace_csv};
use attn_core::CategoryLabels;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

pub const LABELS_SCHEMA: &str = "attn-labels/1";
pub const TRACE_SCHEMA: &str = "attn-trace/1";

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io(path))?))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn init_thread_pool(n: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn load_corpus(path: &Path) -> Result<(CorpusHeader, Vec<Trial>), CliError> {
    let f = File::open(path).map_err(io(path))?;
    read_corpus(BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn trials_gen(cfg: &RunConfig, count: usize, out: &Path) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Config("--count must be positive".into()));
    }
    let trials = generate_corpus(cfg.seed, count, &cfg.world, &cfg.trials)?;
    let header = CorpusHeader::new(count, cfg.seed, cfg.trials.clone(), cfg.world.clone());
    let mut w = create(out)?;
    write_corpus(&mut w, &header, &trials)?;
    let labels: Vec<CategoryLabels> = trials.iter().map(|t| classify(t, &cfg.world)).collect();
    println!("wrote {} trials to {}", trials.len(), out.display());
    print!("{}", frequency_audit(&labels).to_table());
    Ok(())
}

pub fn trials_classify(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (header, trials) = load_corpus(input)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| input.with_extension("labels.jsonl"));
    let labels: Vec<CategoryLabels> = trials.iter().map(|t| classify(t, &header.world)).collect();

    let mut w = create(&out)?;
    let head = json!({
        "schema": LABELS_SCHEMA,
        "corpus_schema": header.schema,
        "corpus_seed": header.seed,
        "corpus_config_hash": header.config_hash,
        "count": trials.len(),
        "world": header.world,
        "generator": header.generator,
    });
    writeln!(w, "{head}").map_err(io(&out))?;
    for (t, l) in trials.iter().zip(&labels) {
        serde_json::to_writer(&mut w, &LabelRecord { id: t.id, labels: *l })?;
        w.write_all(b"\n").map_err(io(&out))?;
    }
    w.flush().map_err(io(&out))?;

    let audit = frequency_audit(&labels);
    let summary = sibling(&out, ".audit.jsonl");
    let mut s = create(&summary)?;
    s.write_all(audit.to_jsonl().as_bytes()).map_err(io(&summary))?;
    s.flush().map_err(io(&summary))?;

    println!("labelled {} trials -> {}", trials.len(), out.display());
    print!("{}", audit.to_table());
    if audit.passed() {
        Ok(())
    } else {
        Err(CliError::AuditFailed)
    }
}

pub fn evolve(cfg: &RunConfig, opts: &RunOptions) -> Result<(), CliError> {
    let ecfg = cfg.evolution_config()?;
    let dir = opts.out_dir.clone().expect("resolved by caller");
    // the resolved config minus where it was written, so reruns elsewhere
    // produce identical files
    let resolved = RunConfig { out_dir: None, ..cfg.clone() };
    let path = dir.join("run_config.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &resolved)?;
    writeln!(w).map_err(io(&path))?;
    w.flush().map_err(io(&path))?;

    let result = run_evolution_with(&ecfg, opts)?;
    let done = result.history.len();
    println!(
        "generation {done}/{}: best {:.3} ({:.2}%), pool changes {}, output in {}",
        ecfg.generations,
        result.best_fitness,
        result.best_fitness / 2.0,
        result.shaping.n_added,
        dir.display()
    );
    Ok(())
}

fn load_genome(path: &Path) -> Result<GenomeFile, CliError> {
    let f = File::open(path).map_err(io(path))?;
    GenomeFile::read(BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Errors when the config names an architecture the genome does not have.
fn check_architecture(cfg: &RunConfig, file: &GenomeFile, explicit: bool) -> Result<(), CliError> {
    if explicit && cfg.evolution.interneurons != file.architecture.n_interneurons {
        return Err(CliError::Config(format!(
            "genome has {} interneurons but the config asks for {}",
            file.architecture.n_interneurons, cfg.evolution.interneurons
        )));
    }
    Ok(())
}

pub fn agent_eval(cfg: &RunConfig, explicit_arch: bool, genome: &Path, corpus: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let file = load_genome(genome)?;
    check_architecture(cfg, &file, explicit_arch)?;
    let g = file.genome()?;
    let (header, trials) = load_corpus(corpus)?;
    let results = batch_evaluate(&g, &file.ranges, &trials, &header.world)?;
    let labels: Vec<(u64, CategoryLabels)> = trials.iter().map(|t| (t.id, classify(t, &header.world))).collect();
    let report = category_report(&results, &labels)?;
    print!("{}", report.to_table());
    if let Some(out) = out {
        let mut w = create(out)?;
        let head = json!({
            "schema": "attn-report/1",
            "genome": genome.display().to_string(),
            "corpus_seed": header.seed,
            "corpus_config_hash": header.config_hash,
            "architecture": file.architecture,
        });
        writeln!(w, "{head}").map_err(io(out))?;
        w.write_all(report.to_jsonl().as_bytes()).map_err(io(out))?;
        w.flush().map_err(io(out))?;
    }
    Ok(())
}

pub fn agent_trace(
    cfg: &RunConfig,
    explicit_arch: bool,
    genome: &Path,
    trial_id: u64,
    corpus: Option<&Path>,
    mirror: bool,
    out: &Path,
) -> Result<(), CliError> {
    let file = load_genome(genome)?;
    check_architecture(cfg, &file, explicit_arch)?;
    let g = file.genome()?;
    let (trial, world) = match corpus {
        Some(path) => {
            let (header, trials) = load_corpus(path)?;
            let t = trials.into_iter().find(|t| t.id == trial_id);
            (t, header.world)
        }
        None => {
            let set = handpicked();
            let t = set
                .initial
                .iter()
                .chain(&set.replacements)
                .chain([&set.unseen_passing.trial])
                .find(|h| h.id == trial_id)
                .map(|h| h.trial());
            (t, cfg.world.clone())
        }
    };
    let trial = trial.ok_or_else(|| CliError::Input(format!("no trial with id {trial_id}")))?;
    let trial = if mirror { trial.mirrored(&world) } else { trial };
    let params = attn_core::genome::decode(&g, &file.ranges)?;
    let result = run_trial(&params, &g.architecture, &trial, &world, true)?;
    let rows = result.trace.as_deref().unwrap_or_default();

    let mut w = create(out)?;
    write_trace_csv(&mut w, rows).map_err(io(out))?;
    w.flush().map_err(io(out))?;

    let meta_path = sibling(out, ".meta.json");
    let meta = json!({
        "schema": TRACE_SCHEMA,
        "genome": genome.display().to_string(),
        "architecture": g.architecture,
        "trial": trial,
        "mirrored": mirror,
        "world": world,
        "score": result.score,
        "landing_offsets": result.landing_offsets,
        "caught": result.caught,
        "steps": result.steps,
    });
    let mut m = create(&meta_path)?;
    serde_json::to_writer_pretty(&mut m, &meta)?;
    writeln!(m).map_err(io(&meta_path))?;
    m.flush().map_err(io(&meta_path))?;
    println!("{} steps, score {:.3} -> {}", result.steps, result.score, out.display());
    Ok(())
}
