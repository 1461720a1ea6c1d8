//! `markmt` command-line front end.

mod commands;

use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "markmt", version, about = "Markup-preserving machine translation and MT evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a document, keeping inline markup.
    Translate(TranslateArgs),
    /// Corpus chrF with a bootstrap confidence interval.
    Chrf(ChrfArgs),
    /// Train an IBM Model 1 lexicon from a `src<TAB>tgt` corpus.
    TrainAlign(TrainAlignArgs),
    /// Word-align line-aligned files with a trained lexicon.
    Align(AlignArgs),
    /// Score system runs against an evaluation set.
    Evaluate(EvaluateArgs),
    /// Build blind annotation batches or aggregate human scores.
    Annotate(AnnotateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: std::path::PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long = "out", value_name = "FILE")]
    pub output: Option<std::path::PathBuf>,
    #[arg(long, value_parser = ["html", "xml", "text"])]
    pub format: String,
    #[arg(long, default_value = "cs")]
    pub src: String,
    #[arg(long, default_value = "uk")]
    pub tgt: String,
    #[arg(long, default_value = "identity", value_parser = ["identity", "dictionary", "remote"])]
    pub backend: String,
    /// Dictionary TSV for the dictionary backend.
    #[arg(long, value_name = "FILE")]
    pub dictionary: Option<std::path::PathBuf>,
    /// Endpoint URL for the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable holding the remote API key.
    #[arg(long, value_name = "NAME")]
    pub api_key_env: Option<String>,
    /// Forward lexicon used when the backend gives no alignment.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<std::path::PathBuf>,
    #[arg(long, value_name = "FILE", requires = "lexicon")]
    pub reverse_lexicon: Option<std::path::PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub glossary: Option<std::path::PathBuf>,
    #[arg(long)]
    pub domain: Option<String>,
}

#[derive(Debug, Args)]
pub struct ChrfArgs {
    #[arg(long, value_name = "FILE")]
    pub hyp: std::path::PathBuf,
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: std::path::PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainAlignArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: std::path::PathBuf,
    #[arg(long, default_value_t = 5)]
    pub iters: usize,
    #[arg(long, value_name = "FILE")]
    pub out: std::path::PathBuf,
    /// Also train the target-to-source direction.
    #[arg(long, value_name = "FILE")]
    pub reverse_out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long, value_name = "FILE")]
    pub lexicon: std::path::PathBuf,
    /// Target-to-source lexicon; enables symmetrization.
    #[arg(long, value_name = "FILE")]
    pub reverse_lexicon: Option<std::path::PathBuf>,
    #[arg(long, default_value = "intersection", value_parser = ["intersection", "union"])]
    pub method: String,
    #[arg(long, value_name = "FILE")]
    pub src: std::path::PathBuf,
    #[arg(long, value_name = "FILE")]
    pub tgt: std::path::PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub evalset: std::path::PathBuf,
    /// System run file; repeat for several systems.
    #[arg(long = "run", value_name = "FILE", required = true)]
    pub runs: Vec<std::path::PathBuf>,
    #[arg(long, default_value = "test", value_parser = ["dev", "test"])]
    pub split: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    /// Human scores to add as a column; needs --key.
    #[arg(long, value_name = "FILE", requires = "key")]
    pub scores: Option<std::path::PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub key: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["make_batch", "aggregate", "errors"])))]
pub struct AnnotateArgs {
    /// Build a blind batch from --evalset and two or more --run files.
    #[arg(long)]
    pub make_batch: bool,
    /// Aggregate --scores through --key.
    #[arg(long)]
    pub aggregate: bool,
    /// Count error annotations in FILE by level and cause.
    #[arg(long, value_name = "FILE")]
    pub errors: Option<std::path::PathBuf>,

    #[arg(long, value_name = "FILE", required_if_eq("make_batch", "true"))]
    pub evalset: Option<std::path::PathBuf>,
    #[arg(long = "run", value_name = "FILE")]
    pub runs: Vec<std::path::PathBuf>,
    /// Comma-separated annotator ids.
    #[arg(long, value_delimiter = ',', required_if_eq("make_batch", "true"))]
    pub annotators: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Restrict to one split.
    #[arg(long, value_parser = ["dev", "test"])]
    pub split: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub redundancy: usize,
    #[arg(long)]
    pub max_segments: Option<usize>,
    #[arg(long, value_name = "FILE", required_if_eq("make_batch", "true"))]
    pub tasks_out: Option<std::path::PathBuf>,
    #[arg(long, value_name = "FILE", required_if_eq("make_batch", "true"))]
    pub key_out: Option<std::path::PathBuf>,

    #[arg(long, value_name = "FILE", required_if_eq("aggregate", "true"))]
    pub scores: Option<std::path::PathBuf>,
    #[arg(long, value_name = "FILE", required_if_eq("aggregate", "true"))]
    pub key: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, value_parser = ["identity", "dictionary", "remote"])]
    pub backend: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            commands::diag("error", &format!("{e:#}"));
            ExitCode::from(1)
        }
    }
}
