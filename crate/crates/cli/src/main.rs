use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use claimq::claims::Claim;
use claimq::dsl::{compile_claim, parse, print_plan, PlanNode};
use claimq::engine::{EngineConfig, ErrorPolicy, Verdict};
use claimq::harness::{
    default_ablations, parse_claims_jsonl, render_ablation, render_report, run_ablation, run_bench, verify_plan,
    BenchConfig, BenchDataset,
};
use claimq::optimizer::{Flags, Optimizer, OptimizerConfig};
use claimq::oracle::remote::{RemoteBackend, RemoteConfig, API_KEY_VAR, ENDPOINT_VAR};
use claimq::oracle::{OracleBackend, PromptCache, ScriptedBackend, ScriptedFixture, SemanticOracle};
use claimq::provenance::Polarity;
use claimq::relation::{ingest, FeatureHashEmbedder, Relation, Schema};

#[derive(Parser)]
#[command(name = "claimq", version, about = "Verify claims about text tables with an LLM-backed query engine")]
struct Cli {
    /// Prompt cache directory.
    #[arg(long, global = true, default_value = ".claimq-cache")]
    cache_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a JSONL dataset into a relation file with embeddings.
    Ingest {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "reviews")]
        name: String,
    },
    /// Translate a natural-language claim into a query program.
    Compile {
        #[arg(long)]
        claim: String,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        /// Write the program here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a claim or program against a dataset.
    Verify {
        #[arg(long, conflicts_with = "program", required_unless_present = "program")]
        claim: Option<String>,
        /// Program file.
        #[arg(long)]
        program: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Print the verdict as JSON.
        #[arg(long)]
        json: bool,
        /// Also write the verdict JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the tuples cited by a saved verdict.
    Explain {
        #[arg(long)]
        verdict: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run a claim suite and report quality, cost and latency.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        /// Claims file (JSONL); defaults to `claims.jsonl` in the data directory.
        #[arg(long)]
        claims: Option<PathBuf>,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// Also rerun with optimizations disabled one at a time (or only the named ones).
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        ablate: Option<Vec<String>>,
        #[arg(long)]
        json: bool,
    },
    /// Inspect or empty the prompt cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    Stats,
    Clear,
}

#[derive(Args)]
struct DataArgs {
    /// Relation file, or a directory holding `relation.json` or `schema.json` + `records.jsonl`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Use the scripted oracle instead of a remote model.
    #[arg(long)]
    offline: bool,
    /// Scripted oracle fixture; defaults to `oracle.json` in the data directory.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value = "gpt-4o-mini")]
    model: String,
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Optimizations to turn off (comma separated, or `all`).
    #[arg(long, value_delimiter = ',')]
    disable: Vec<String>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Drop tuples whose answers cannot be parsed instead of aborting.
    #[arg(long)]
    skip_errors: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RunArgs {
    fn configs(&self) -> Result<(OptimizerConfig, EngineConfig)> {
        let mut flags = Flags::default();
        for name in &self.disable {
            if name == "all" {
                flags = Flags::none();
            } else {
                flags = flags.without(name)?;
            }
        }
        let opt = OptimizerConfig {
            flags,
            seed: self.seed,
            ..Default::default()
        };
        let engine = EngineConfig {
            batch_size: self.batch_size.max(1),
            error_policy: if self.skip_errors { ErrorPolicy::Skip } else { ErrorPolicy::Abort },
            seed: self.seed,
            ..Default::default()
        };
        Ok((opt, engine))
    }
}

fn data_dir(path: &Path) -> &Path {
    if path.is_dir() {
        path
    } else {
        path.parent().unwrap_or(Path::new("."))
    }
}

fn load_relation(path: &Path) -> Result<Relation> {
    let file = if path.is_dir() { path.join("relation.json") } else { path.to_path_buf() };
    if file.is_file() {
        let src = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        return serde_json::from_str(&src).with_context(|| format!("parsing relation {}", file.display()));
    }
    let schema = path.join("schema.json");
    let records = path.join("records.jsonl");
    if !schema.is_file() || !records.is_file() {
        bail!("{} holds neither relation.json nor schema.json + records.jsonl", path.display());
    }
    ingest_files(&schema, &records, "reviews")
}

fn ingest_files(schema: &Path, records: &Path, name: &str) -> Result<Relation> {
    let schema = Schema::from_json(&fs::read_to_string(schema).with_context(|| format!("reading {}", schema.display()))?)?;
    let file = fs::File::open(records).with_context(|| format!("opening {}", records.display()))?;
    Ok(ingest(name, BufReader::new(file), &schema, &FeatureHashEmbedder::default())?)
}

/// `programs` maps claim texts to known programs for the scripted oracle.
fn backend(args: &OracleArgs, data: &Path, programs: &[(String, String)]) -> Result<(Arc<dyn OracleBackend>, String)> {
    if !args.offline {
        let cfg = RemoteConfig::from_env(ENDPOINT_VAR, API_KEY_VAR)?;
        return Ok((Arc::new(RemoteBackend::new(cfg)), args.model.clone()));
    }
    let path = args.fixture.clone().unwrap_or_else(|| data_dir(data).join("oracle.json"));
    let mut fixture = if path.is_file() {
        let src = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        ScriptedFixture::from_json(&src).with_context(|| format!("parsing fixture {}", path.display()))?
    } else if args.fixture.is_some() {
        bail!("fixture {} not found", path.display());
    } else {
        ScriptedFixture::default()
    };
    fixture.compile.extend(programs.iter().cloned());
    Ok((Arc::new(ScriptedBackend::new(fixture)?), "scripted".into()))
}

fn oracle(cli: &Cli, args: &OracleArgs, data: &Path) -> Result<SemanticOracle> {
    let (backend, model) = backend(args, data, &[])?;
    let mut o = SemanticOracle::new(backend, model);
    if !args.no_cache {
        o = o.with_cache(open_cache(&cli.cache_dir)?);
    }
    Ok(o)
}

fn open_cache(dir: &Path) -> Result<Arc<PromptCache>> {
    Ok(Arc::new(
        PromptCache::open(dir).with_context(|| format!("opening cache {}", dir.display()))?,
    ))
}

fn render_verdict(v: &Verdict, relation: &Relation) -> String {
    let mut s = format!("verdict: {}\nresolution: {:?}\n", v.value, v.resolution);
    s.push_str(&format!(
        "oracle calls: {} ({} backend, {} cached), tuples processed: {}\n",
        v.stats.oracle_calls, v.stats.backend_calls, v.stats.cache_hits, v.stats.tuples_processed
    ));
    for n in &v.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    s.push_str(&format!("cited tuples ({}):\n", v.tokens.len()));
    for t in &v.tokens {
        let sign = match t.polarity {
            Polarity::Pos => '+',
            Polarity::Neg => '-',
        };
        let Some(row) = relation.rows.iter().find(|r| r.row_id == t.row_id) else {
            s.push_str(&format!("  {sign} row {} (not in this relation)\n", t.row_id));
            continue;
        };
        let attrs: Vec<String> = row.attrs.iter().map(|(k, v)| format!("{k}={}", v.render())).collect();
        s.push_str(&format!("  {sign} row {}: {}\n", t.row_id, attrs.join(" | ")));
    }
    s
}

fn load_plan(claim: &Option<String>, program: &Option<PathBuf>, relation: &Relation, oracle: &SemanticOracle) -> Result<PlanNode> {
    if let Some(p) = program {
        let src = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        return Ok(parse(&src, &relation.schema)?);
    }
    let text = claim.as_deref().expect("clap requires a claim or a program");
    Ok(compile_claim(&Claim::new(text), &relation.schema, oracle)?)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            schema,
            records,
            out,
            name,
        } => {
            let rel = ingest_files(schema, records, name)?;
            fs::write(out, serde_json::to_string(&rel)?).with_context(|| format!("writing {}", out.display()))?;
            println!("ingested {} rows into {}", rel.row_count(), out.display());
        }
        Command::Compile {
            claim,
            data,
            oracle: oargs,
            out,
        } => {
            let rel = load_relation(&data.data)?;
            let o = oracle(cli, oargs, &data.data)?;
            let plan = compile_claim(&Claim::new(claim.as_str()), &rel.schema, &o)?;
            let text = print_plan(&plan);
            match out {
                Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
        }
        Command::Verify {
            claim,
            program,
            data,
            oracle: oargs,
            run,
            json,
            out,
        } => {
            let rel = load_relation(&data.data)?;
            let o = oracle(cli, oargs, &data.data)?;
            let plan = load_plan(claim, program, &rel, &o)?;
            let (ocfg, ecfg) = run.configs()?;
            let v = verify_plan(&plan, &rel, &o, &Optimizer::new(ocfg), &ecfg, &FeatureHashEmbedder::default())?;
            let doc = json!({ "program": print_plan(&plan), "verdict": v });
            if let Some(p) = out {
                fs::write(p, serde_json::to_string_pretty(&doc)?).with_context(|| format!("writing {}", p.display()))?;
            }
            if *json {
                println!("{}", serde_json::to_string_pretty(&doc)?);
            } else {
                print!("{}", render_verdict(&v, &rel));
            }
        }
        Command::Explain { verdict, data } => {
            let rel = load_relation(&data.data)?;
            let src = fs::read_to_string(verdict).with_context(|| format!("reading {}", verdict.display()))?;
            let mut doc: serde_json::Value = serde_json::from_str(&src)?;
            if let Some(p) = doc.get("program").and_then(|p| p.as_str()) {
                println!("program:\n{p}");
            }
            let v: Verdict = serde_json::from_value(doc.get_mut("verdict").map(|v| v.take()).unwrap_or(doc))
                .context("verdict file does not hold a verdict")?;
            print!("{}", render_verdict(&v, &rel));
        }
        Command::Bench {
            data,
            claims,
            oracle: oargs,
            run,
            trials,
            ablate,
            json,
        } => {
            let relation = load_relation(&data.data)?;
            let claims_path = claims.clone().unwrap_or_else(|| data_dir(&data.data).join("claims.jsonl"));
            let src = fs::read_to_string(&claims_path).with_context(|| format!("reading {}", claims_path.display()))?;
            let datasets = vec![BenchDataset {
                relation,
                claims: parse_claims_jsonl(&src)?,
            }];
            let programs: Vec<(String, String)> = datasets[0]
                .claims
                .iter()
                .filter_map(|c| Some((c.text.clone(), c.program.clone()?)))
                .collect();
            let (optimizer, engine) = run.configs()?;
            let (backend, model) = backend(oargs, &data.data, &programs)?;
            let cache_dir = (!oargs.no_cache).then(|| cli.cache_dir.clone());
            if cache_dir.is_some() {
                open_cache(&cli.cache_dir)?;
            }
            let factory = move |caching: bool| {
                let o = SemanticOracle::new(backend.clone(), model.clone());
                match (&cache_dir, caching) {
                    (Some(dir), true) => o.with_cache(open_cache(dir).expect("cache opened once already")),
                    (None, true) => o.with_cache(Arc::new(PromptCache::in_memory())),
                    _ => o,
                }
            };
            let cfg = BenchConfig {
                optimizer,
                engine,
                trials: *trials,
                ..Default::default()
            };
            match ablate {
                Some(names) => {
                    let names = if names.is_empty() { default_ablations() } else { names.clone() };
                    let r = run_ablation(&datasets, &cfg, &names, &factory)?;
                    if *json {
                        println!("{}", serde_json::to_string_pretty(&r)?);
                    } else {
                        print!("{}", render_ablation(&r));
                    }
                }
                None => {
                    let r = run_bench(&datasets, &cfg, &factory);
                    if *json {
                        println!("{}", serde_json::to_string_pretty(&r)?);
                    } else {
                        print!("{}", render_report(&r));
                    }
                }
            }
        }
        Command::Cache { action } => {
            let cache = PromptCache::open(&cli.cache_dir).with_context(|| format!("opening cache {}", cli.cache_dir.display()))?;
            match action {
                CacheAction::Stats => {
                    let s = cache.stats();
                    println!(
                        "entries: {}\nsegments: {}\nbytes: {}\nevicted: {}",
                        s.entries, s.segments, s.bytes, s.evicted
                    );
                }
                CacheAction::Clear => {
                    let n = cache.stats().entries;
                    cache.clear()?;
                    println!("cleared {n} entries");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!("{}", json!({ "error": e.to_string(), "causes": causes }));
            ExitCode::FAILURE
        }
    }
}
