//! Command-line front end. [`dispatch`] is the whole program; `main` only
//! forwards its exit code.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gdrkit_core::augment::{apply_plan, fundus_aug, AugPlan};
use gdrkit_core::bench::{default_specs, desk_preset, domain_stats, evaluate, Protocol};
use gdrkit_core::dcr::{dcr_weights, occurrence_probs_with, QMode};
use gdrkit_core::gradcheck::{check_cross_entropy, check_network, check_ntxent, small_net_config};
use gdrkit_core::model::{train, Method, TrainConfig};
use gdrkit_core::rng::{Purpose, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{apply_overrides, entries, finalize, load_config_file, render_config};
use crate::io::{load_image, save_image};
use crate::manifest::Manifest;
use crate::modelfile::{load_model, save_model};
use crate::report::{config_json, dcr_key_values, dcr_tables, metrics_table, stats_table, Artifact};
use crate::runner::run_protocol;
use crate::synth::{load_specs, write_corpus, MANIFEST_NAME};

pub const SEED_ENV: &str = "GDRKIT_SEED";

#[derive(Debug, Parser)]
#[command(name = "gdrkit", version, about = "Fundus augmentation, hybrid-loss training, and DG/ESDG benchmarking")]
pub struct Cli {
    /// Worker threads; results are identical for every value.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Global seed. Falls back to $GDRKIT_SEED, then to the config's seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Suppress progress and warnings on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Recipe tuned for 64×64 synthetic images trained from scratch.
    Desk,
    /// `TrainConfig::default()`: step size 1e-3 decaying to 1e-4, full augmentation ranges.
    Reference,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file applied on top of the preset.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// `key=value` override applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Augment every PNG/JPEG in a directory and record the sampled plans.
    Augment {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Write one JSON line per image with its plan.
        #[arg(long, value_name = "FILE")]
        plan_out: Option<PathBuf>,
        /// Apply plans from a previous `--plan-out` file instead of sampling.
        #[arg(long, value_name = "FILE", conflicts_with = "plan_out")]
        replay: Option<PathBuf>,
    },
    /// Print DCR occurrence probabilities and weights for a manifest.
    DcrWeights {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, default_value_t = gdrkit_core::dcr::DEFAULT_BETA)]
        beta: f64,
        /// `joint` divides by the total sample count, `conditional` by each domain's.
        #[arg(long, default_value = "joint")]
        q_mode: String,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Render a synthetic multi-domain corpus with its manifest.
    Synth {
        /// JSON domain specs; the built-in four-domain benchmark when omitted.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Per-domain color statistics and class histograms.
    Stats {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Train one network on every domain of a manifest.
    Train {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score a saved model on a manifest.
    Eval {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Run the DG or ESDG protocol and write text and JSON reports.
    Bench {
        #[arg(long, value_parser = parse_protocol)]
        protocol: Protocol,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Finite-difference checks of the losses and the network backward pass.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (erm, gdrnet, A..G)"))
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    Protocol::parse(s).ok_or_else(|| format!("unknown protocol `{s}` (dg, esdg)"))
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;
type CmdResult = Result<(), BoxError>;

struct Ctx {
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn warn(&self, msg: &str) {
        if !self.quiet {
            eprintln!("warning: {msg}");
        }
    }

    fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Base config from the preset, then the file, overrides, and seed.
    fn train_config(&self, args: &ConfigArgs, method: Option<Method>) -> Result<TrainConfig, BoxError> {
        let base = match args.preset {
            Preset::Desk => desk_preset(method.unwrap_or(Method::GdrNet), 0),
            Preset::Reference => TrainConfig {
                method: method.unwrap_or(Method::GdrNet),
                ..TrainConfig::default()
            },
        };
        let mut cfg = match &args.config {
            Some(p) => load_config_file(p, base)?,
            None => base,
        };
        apply_overrides(&mut cfg, &args.overrides)?;
        if let Some(m) = method {
            cfg.method = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        for w in finalize(&mut cfg)? {
            self.warn(&w);
        }
        Ok(cfg)
    }

    fn plain_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn env_seed() -> Result<Option<u64>, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{SEED_ENV}=`{v}` is not a nonnegative integer")),
        Err(_) => Ok(None),
    }
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

fn mkdir(path: &Path) -> CmdResult {
    std::fs::create_dir_all(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    Ok(())
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> CmdResult {
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    let ctx = Ctx {
        seed,
        quiet: cli.quiet,
    };
    let body = || match cli.command {
        Command::Augment {
            input,
            out,
            config,
            plan_out,
            replay,
        } => augment(&ctx, &input, &out, &config, plan_out.as_deref(), replay.as_deref()),
        Command::DcrWeights {
            manifest,
            beta,
            q_mode,
            json,
        } => dcr(&ctx, &manifest, beta, &q_mode, json.as_deref()),
        Command::Synth { spec, out } => synth(&ctx, spec.as_deref(), &out),
        Command::Stats { manifest, json } => stats(&ctx, &manifest, json.as_deref()),
        Command::Train {
            manifest,
            method,
            config,
            out,
        } => train_cmd(&ctx, &manifest, method, &config, &out),
        Command::Eval { model, manifest, json } => eval(&ctx, &model, &manifest, json.as_deref()),
        Command::Bench {
            protocol,
            manifest,
            method,
            config,
            out,
        } => bench(&ctx, protocol, &manifest, method, &config, &out),
        Command::GradCheck { instances } => grad_check(&ctx, instances),
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| format!("cannot start {n} threads: {e}"))?
            .install(body),
        None => body(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PlanLine {
    Header {
        tool: String,
        seed: u64,
        config: serde_json::Value,
    },
    Plan {
        file: String,
        index: u64,
        plan: AugPlan,
    },
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot list {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn output_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    format!("{stem}.png")
}

fn augment(ctx: &Ctx, input: &Path, out: &Path, args: &ConfigArgs, plan_out: Option<&Path>, replay: Option<&Path>) -> CmdResult {
    let cfg = ctx.train_config(args, None)?;
    let seed = cfg.seed;
    let files = list_images(input)?;
    mkdir(out)?;
    let plans: Vec<AugPlan> = match replay {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let mut by_file = std::collections::HashMap::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let parsed: PlanLine =
                    serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
                if let PlanLine::Plan { file, plan, .. } = parsed {
                    by_file.insert(file, plan);
                }
            }
            files
                .iter()
                .map(|f| {
                    let name = output_name(f);
                    by_file.remove(&name).ok_or_else(|| format!("no plan recorded for {name}"))
                })
                .collect::<Result<_, _>>()?
        }
        None => Vec::new(),
    };
    let results = files
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let img = load_image(f)?;
            let (aug, plan) = if replay.is_some() {
                (apply_plan(&img, &plans[i]), plans[i].clone())
            } else {
                fundus_aug(&img, &cfg.aug, &mut RngStream::derive(seed, i as u64, 0, Purpose::Corpus))
            };
            save_image(&aug, &out.join(output_name(f)))?;
            Ok(plan)
        })
        .collect::<Result<Vec<AugPlan>, crate::io::IoError>>()?;
    if let Some(p) = plan_out {
        let mut text = serde_json::to_string(&PlanLine::Header {
            tool: env!("CARGO_PKG_NAME").into(),
            seed,
            config: config_json(&entries(&cfg)),
        })?;
        text.push('\n');
        for (i, (f, plan)) in files.iter().zip(results).enumerate() {
            text.push_str(&serde_json::to_string(&PlanLine::Plan {
                file: output_name(f),
                index: i as u64,
                plan,
            })?);
            text.push('\n');
        }
        write_file(p, &text)?;
    }
    write_file(&out.join("augment.config"), &render_config(&cfg))?;
    ctx.info(&format!("augmented {} image(s) into {}", files.len(), out.display()));
    Ok(())
}

fn dcr(ctx: &Ctx, manifest: &Path, beta: f64, q_mode: &str, json: Option<&Path>) -> CmdResult {
    let mode = match q_mode {
        "joint" => QMode::Joint,
        "conditional" => QMode::Conditional,
        other => return Err(format!("unknown q mode `{other}` (joint, conditional)").into()),
    };
    let m = Manifest::load(manifest)?;
    let domains = m.domains();
    let mut counts = vec![0u64; domains.len() * gdrkit_core::data::N_GRADES];
    for r in &m.records {
        let d = domains.iter().position(|x| *x == r.domain).expect("listed");
        counts[d * gdrkit_core::data::N_GRADES + r.grade] += 1;
    }
    let counts = gdrkit_core::dcr::DomainClassCounts::new(domains, gdrkit_core::data::N_GRADES, counts)?;
    let table = dcr_weights(&occurrence_probs_with(&counts, mode)?, beta)?;
    print(&dcr_tables(&table));
    print("\n");
    print(&dcr_key_values(&table));
    if let Some(p) = json {
        let config = serde_json::json!({ "beta": beta, "q_mode": q_mode, "manifest": manifest.display().to_string() });
        write_file(p, &Artifact::new("dcr-weights", ctx.plain_seed(), config, &table).to_json())?;
    }
    Ok(())
}

fn synth(ctx: &Ctx, spec: Option<&Path>, out: &Path) -> CmdResult {
    let specs = match spec {
        Some(p) => load_specs(p)?,
        None => default_specs(),
    };
    let seed = ctx.plain_seed();
    let records = write_corpus(&specs, seed, out)?;
    ctx.info(&format!(
        "wrote {} images and {} (seed {seed})",
        records.len(),
        out.join(MANIFEST_NAME).display()
    ));
    Ok(())
}

fn stats(ctx: &Ctx, manifest: &Path, json: Option<&Path>) -> CmdResult {
    let ds = Manifest::load(manifest)?.load_dataset(None)?;
    let s = domain_stats(&ds.view());
    print(&stats_table(&s));
    if let Some(p) = json {
        let config = serde_json::json!({ "manifest": manifest.display().to_string() });
        write_file(p, &Artifact::new("stats", ctx.plain_seed(), config, &s).to_json())?;
    }
    Ok(())
}

fn input_size(cfg: &TrainConfig) -> Option<(usize, usize)> {
    Some((cfg.net.input_width, cfg.net.input_height))
}

fn train_cmd(ctx: &Ctx, manifest: &Path, method: Method, args: &ConfigArgs, out: &Path) -> CmdResult {
    let cfg = ctx.train_config(args, Some(method))?;
    let ds = Manifest::load(manifest)?.load_dataset(input_size(&cfg))?;
    ctx.info(&format!("training {} on {} images (seed {})", method.name(), ds.samples.len(), cfg.seed));
    let trained = train(&cfg, &ds.view())?;
    save_model(out, &cfg, &trained.net)?;
    let history = out.with_extension("history.json");
    let config = config_json(&entries(&cfg));
    write_file(&history, &Artifact::new("train", cfg.seed, config, &trained.history).to_json())?;
    if let Some(last) = trained.history.epochs.last() {
        ctx.info(&format!("final epoch loss {:.4}; model written to {}", last.loss, out.display()));
    }
    Ok(())
}

fn eval(ctx: &Ctx, model: &Path, manifest: &Path, json: Option<&Path>) -> CmdResult {
    let saved = load_model(model)?;
    let ds = Manifest::load(manifest)?.load_dataset(input_size(&saved.config))?;
    let m = evaluate(&saved.net, &ds.view())?;
    let rows = vec![[
        ds.domains.join("+"),
        m.samples.to_string(),
        format!("{:.1}", m.auc),
        format!("{:.1}", m.acc),
        format!("{:.1}", m.f1),
    ]];
    print(&format!(
        "model {}  method {}  seed {}\n",
        model.display(),
        saved.config.method.name(),
        saved.config.seed
    ));
    print(&crate::report::table(&["target", "n", "AUC", "ACC", "F1"], &rows));
    if let Some(p) = json {
        let config = config_json(&entries(&saved.config));
        write_file(p, &Artifact::new("eval", saved.config.seed, config, &m).to_json())?;
    }
    let _ = ctx;
    Ok(())
}

fn bench(ctx: &Ctx, protocol: Protocol, manifest: &Path, method: Method, args: &ConfigArgs, out: &Path) -> CmdResult {
    let cfg = ctx.train_config(args, Some(method))?;
    let ds = Manifest::load(manifest)?.load_dataset(input_size(&cfg))?;
    ctx.info(&format!(
        "{} protocol, method {}, seed {}, {} domains",
        protocol.name(),
        method.name(),
        cfg.seed,
        ds.domains.len()
    ));
    let report = run_protocol(&ds, protocol, &cfg)?;
    mkdir(out)?;
    let text = metrics_table(&report);
    print(&text);
    let stem = format!("{}_{}_seed{}", protocol.name(), method.name(), cfg.seed);
    write_file(&out.join(format!("{stem}.txt")), &format!("{text}\n# effective config\n{}", render_config(&cfg)))?;
    let config = config_json(&entries(&cfg));
    write_file(&out.join(format!("{stem}.json")), &Artifact::new("bench", cfg.seed, config, &report).to_json())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct GradSummary {
    suite: &'static str,
    instances: usize,
    coordinates: usize,
    max_rel_error: f64,
    tolerance: f64,
    pass: bool,
}

fn grad_check(ctx: &Ctx, instances: usize) -> CmdResult {
    let seed = ctx.plain_seed();
    let suites = [
        ("cross_entropy", check_cross_entropy(instances, seed)?, 1e-5),
        ("ntxent", check_ntxent(instances, seed)?, 1e-5),
        ("network", check_network(instances, seed, small_net_config())?, 1e-4),
    ];
    let rows: Vec<GradSummary> = suites
        .iter()
        .map(|(name, r, tol)| GradSummary {
            suite: name,
            instances: r.instances,
            coordinates: r.coordinates,
            max_rel_error: r.max_rel_error,
            tolerance: *tol,
            pass: r.max_rel_error < *tol,
        })
        .collect();
    let table_rows: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.suite.to_string(),
                r.instances.to_string(),
                format!("{:.3e}", r.max_rel_error),
                format!("{:.0e}", r.tolerance),
                if r.pass { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    print(&crate::report::table(&["suite", "instances", "max rel err", "tolerance", ""], &table_rows));
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err("gradient check failed".into())
    }
}
