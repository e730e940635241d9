use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use mifi_core::code::{crossvalidate_globals, BaselineCoder, GlobalRegressor};
use mifi_core::metrics::{der, f1_per_class, krippendorff_alpha, resolve_stacked, wer_session, Level, RaterMatrix};
use mifi_core::report::SessionReport;
use mifi_core::rttm::{by_file, read_rttm, write_rttm, RttmSegment};
use mifi_core::types::{write_transcript, FrameTrack, Role};
use mifi_core::vad::{extract_features, read_feature_file};
use mifi_core::NgramModel;
use mifi_harness::config::CONFIG_ENV;
use mifi_harness::experiment::{Corruption, Prepared};
use mifi_harness::io::{list_files, read_json, read_sessions, read_transcript_file, read_wav, write_json, write_session_bundle, write_wav};
use mifi_harness::pipeline::PipelineOutput;
use mifi_harness::signal::{render_audio, session_frames, session_regions, SignalConfig};
use mifi_harness::synth::SynthSession;
use mifi_harness::{generate, run_batch, PipelineConfig, RunOutcome, SynthConfig, TrainingConfig, TrainingData, WerRates};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "mifi", version, about = "Automated coding and feedback for recorded counseling sessions")]
struct Cli {
    /// Pipeline configuration (TOML). Flags override file values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true, help_heading = "Gate")]
    min_duration: Option<f64>,
    #[arg(long, global = true, help_heading = "Gate")]
    max_duration: Option<f64>,
    #[arg(long, global = true, help_heading = "Gate")]
    min_voiced_fraction: Option<f64>,
    #[arg(long, global = true, help_heading = "Gate")]
    max_mean_voiced_segment: Option<f64>,
    #[arg(long, global = true, help_heading = "Gate")]
    min_speaker_fraction: Option<f64>,
    #[arg(long, global = true, help_heading = "VAD")]
    vad_median_taps: Option<usize>,
    #[arg(long, global = true, help_heading = "VAD")]
    vad_merge_gap: Option<f64>,
    #[arg(long, global = true, help_heading = "VAD")]
    vad_frame_step: Option<f64>,
    #[arg(long, global = true, help_heading = "VAD")]
    vad_threshold_quantile: Option<f64>,
    #[arg(long, global = true, help_heading = "Diarization")]
    sub_len: Option<f64>,
    #[arg(long, global = true, help_heading = "Diarization")]
    sub_shift: Option<f64>,
    #[arg(long, global = true, help_heading = "Diarization")]
    num_speakers: Option<usize>,
    #[arg(long, global = true, help_heading = "Diarization")]
    turn_gap: Option<f64>,
    #[arg(long, global = true, help_heading = "Diarization")]
    embed_skip_dims: Option<usize>,
    #[arg(long, global = true, help_heading = "Segmentation")]
    pause_split: Option<f64>,
    #[arg(long, global = true, help_heading = "Segmentation")]
    max_tokens: Option<usize>,
    /// Weight of the role model against the background model.
    #[arg(long, global = true)]
    in_domain_weight: Option<f64>,
    /// Worker threads for batch runs (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut PipelineConfig) {
        fn set<T: Copy>(dst: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *dst = v;
            }
        }
        set(&mut c.gate.min_duration, self.min_duration);
        set(&mut c.gate.max_duration, self.max_duration);
        set(&mut c.gate.min_voiced_fraction, self.min_voiced_fraction);
        set(&mut c.gate.max_mean_voiced_segment, self.max_mean_voiced_segment);
        set(&mut c.gate.min_speaker_fraction, self.min_speaker_fraction);
        set(&mut c.vad.median_taps, self.vad_median_taps);
        set(&mut c.vad.merge_gap, self.vad_merge_gap);
        set(&mut c.vad.frame_step, self.vad_frame_step);
        set(&mut c.vad.threshold_quantile, self.vad_threshold_quantile);
        set(&mut c.diarize.sub_len, self.sub_len);
        set(&mut c.diarize.sub_shift, self.sub_shift);
        set(&mut c.diarize.num_speakers, self.num_speakers);
        set(&mut c.diarize.turn_gap, self.turn_gap);
        set(&mut c.embed_skip_dims, self.embed_skip_dims);
        set(&mut c.segmenter.pause_split, self.pause_split);
        set(&mut c.segmenter.max_tokens, self.max_tokens);
        set(&mut c.in_domain_weight, self.in_domain_weight);
        set(&mut c.workers, self.workers);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic sessions with full ground truth.
    Synth(SynthArgs),
    /// Run the pipeline over sessions and write reports.
    Run(RunArgs),
    /// Score outputs against references.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Train role language models from reference transcripts.
    TrainLm(TrainLmArgs),
    /// Train the utterance coder and the global score regressors.
    TrainCoder(TrainCoderArgs),
    /// Cross-validate the global score regressors.
    CvGlobals(CvArgs),
    /// Render a JSON report as HTML.
    Report(ReportArgs),
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Generator settings (TOML); `--sessions` and `--seed` override it.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write rendered feature tracks (`<id>.feat`).
    #[arg(long)]
    features: bool,
    /// Also write rendered waveforms (`<id>.wav`).
    #[arg(long)]
    wav: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Reference voiced regions and speaker turns.
    Transcript,
    /// VAD and diarization on features: `<id>.wav`, then `<id>.feat`, else rendered.
    Signal,
}

#[derive(Args)]
struct RunArgs {
    /// `*.session.json` files or directories holding them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    models: PathBuf,
    #[arg(long, value_enum, default_value = "transcript")]
    mode: Mode,
    /// Directory for JSON reports and verdicts.
    #[arg(long)]
    json_dir: PathBuf,
    /// Directory for HTML reports; omitted means no HTML.
    #[arg(long)]
    html_dir: Option<PathBuf>,
    /// Injected word substitution, deletion and insertion rates.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
    wer: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    speaker_confusion: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Diarization error rate between RTTM files.
    Der {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        collar: f64,
    },
    /// Word error rate between transcript files, per session and pooled.
    Wer {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
    },
    /// Per-code F1 of predicted therapist codes against reference codes.
    F1 {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
    },
    /// Krippendorff's alpha of a CSV (rows items, columns raters, blanks missing).
    Alpha {
        ratings: PathBuf,
        #[arg(long, value_enum, default_value = "interval")]
        level: LevelArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Nominal => Level::Nominal,
            LevelArg::Ordinal => Level::Ordinal,
            LevelArg::Interval => Level::Interval,
            LevelArg::Ratio => Level::Ratio,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Therapist,
    Client,
    Background,
    All,
}

#[derive(Args)]
struct TrainLmArgs {
    /// Directory of reference transcripts (`*.jsonl`).
    #[arg(long)]
    data: PathBuf,
    /// Model directory; files are `<role>.arpa`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    role: RoleArg,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    discount: Option<f64>,
}

#[derive(Args)]
struct TrainCoderArgs {
    /// Directory of synthetic sessions (`*.session.json`).
    #[arg(long)]
    data: PathBuf,
    /// Model directory for `coder.json` and `globals.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Also write the full fold report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    input: PathBuf,
    #[arg(long)]
    html: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::Run(a) => run(a, &pipeline_config(cli)?),
        Command::Eval(e) => eval(e).map(|_| 0),
        Command::TrainLm(a) => train_lm(a).map(|_| 0),
        Command::TrainCoder(a) => train_coder(a).map(|_| 0),
        Command::CvGlobals(a) => cv_globals(a).map(|_| 0),
        Command::Report(a) => {
            let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
            let r = SessionReport::from_json(&text)?;
            fs::write(&a.html, r.to_html()).with_context(|| format!("writing {}", a.html.display()))?;
            Ok(0)
        }
        Command::ShowConfig => {
            print!("{}", pipeline_config(cli)?.to_toml());
            Ok(0)
        }
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.synth_config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SynthConfig::default(),
    };
    if let Some(n) = a.sessions {
        cfg.num_sessions = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let corpus = generate(&cfg)?;
    let sig = SignalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xfea7);
    for s in &corpus {
        let frames = a.features.then(|| session_frames(s, &sig, &mut rng));
        write_session_bundle(&a.out, s, frames.as_ref())?;
        if a.wav {
            let audio = render_audio(s.total_duration, &session_regions(s), &sig, &mut rng);
            write_wav(&a.out.join(format!("{}.wav", s.id)), &audio, sig.sample_rate)?;
        }
    }
    info!("wrote {} sessions to {}", corpus.len(), a.out.display());
    Ok(())
}

fn collect_sessions(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, SynthSession)>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for f in list_files(p, ".session.json")? {
                out.push((p.clone(), read_json(&f)?));
            }
        } else {
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            out.push((dir, read_json(p)?));
        }
    }
    if out.is_empty() {
        bail!("no sessions found");
    }
    Ok(out)
}

fn signal_frames(dir: &Path, s: &SynthSession, cfg: &PipelineConfig, seed: u64) -> Result<FrameTrack> {
    let wav = dir.join(format!("{}.wav", s.id));
    let feat = dir.join(format!("{}.feat", s.id));
    if wav.exists() {
        let (samples, sr) = read_wav(&wav)?;
        Ok(extract_features(&samples, sr, cfg.vad.frame_step, FrameTrack::DEFAULT_WINDOW)?)
    } else if feat.exists() {
        let f = fs::File::open(&feat)?;
        Ok(read_feature_file(BufReader::new(f))?)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf7a3_e5);
        Ok(session_frames(s, &SignalConfig::default(), &mut rng))
    }
}

fn run(a: &RunArgs, cfg: &PipelineConfig) -> Result<u8> {
    let models = mifi_harness::Models::load(&a.models, cfg.in_domain_weight)?;
    let sessions = collect_sessions(&a.inputs)?;
    let pool = SynthConfig::default().token_pool();
    let mut prepared = Vec::with_capacity(sessions.len());
    for (i, (dir, s)) in sessions.iter().enumerate() {
        let c = Corruption {
            wer: WerRates::new(a.wer[0], a.wer[1], a.wer[2]),
            speaker_confusion: a.speaker_confusion,
            pool: pool.clone(),
            seed: a.seed.wrapping_add(i as u64),
        };
        let mut p = Prepared::oracle(s, &c);
        if matches!(a.mode, Mode::Signal) {
            p.frames = Some(signal_frames(dir, s, cfg, c.seed)?);
        }
        prepared.push(p);
    }
    let inputs: Vec<_> = prepared.iter().map(Prepared::input).collect();
    let results = run_batch(&inputs, &models, cfg);

    fs::create_dir_all(&a.json_dir)?;
    if let Some(h) = &a.html_dir {
        fs::create_dir_all(h)?;
    }
    let mut exit = 0u8;
    let mut failed = false;
    for (p, r) in prepared.iter().zip(results) {
        match r {
            Ok(RunOutcome::Completed(out)) => {
                write_outputs(&p.id, &out, a)?;
                info!("{}: pass, report written", p.id);
            }
            Ok(RunOutcome::Halted(v)) => {
                write_json(&a.json_dir.join(format!("{}.verdict.json", p.id)), &v)?;
                warn!("{}: halted, {}", p.id, v.outcome);
                if exit == 0 {
                    exit = v.outcome.exit_code() as u8;
                }
            }
            Err(e) => {
                warn!("{}: {} stage failed: {e}", p.id, e.stage());
                failed = true;
            }
        }
    }
    if failed {
        bail!("one or more sessions failed");
    }
    Ok(exit)
}

fn write_outputs(id: &str, out: &PipelineOutput, a: &RunArgs) -> Result<()> {
    let dir = &a.json_dir;
    fs::write(dir.join(format!("{id}.report.json")), out.report.to_json()?)?;
    let f = fs::File::create(dir.join(format!("{id}.hyp.jsonl")))?;
    write_transcript(BufWriter::new(f), id, &out.utterances)?;
    let segs: Vec<RttmSegment> = out
        .turns
        .iter()
        .map(|t| RttmSegment {
            file: id.to_string(),
            span: t.span,
            speaker: t.role.map_or_else(|| t.cluster.to_string(), |r| r.to_string()),
        })
        .collect();
    write_rttm(BufWriter::new(fs::File::create(dir.join(format!("{id}.hyp.rttm")))?), &segs)?;
    if let Some(h) = &a.html_dir {
        fs::write(h.join(format!("{id}.html")), out.report.to_html())?;
    }
    Ok(())
}

fn read_rttm_file(p: &Path) -> Result<BTreeMap<String, Vec<(mifi_core::types::TimeSpan, String)>>> {
    let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
    Ok(by_file(read_rttm(BufReader::new(f))?))
}

fn eval(e: &EvalCmd) -> Result<()> {
    match e {
        EvalCmd::Der {
            reference,
            hypothesis,
            collar,
        } => {
            let r = read_rttm_file(reference)?;
            let h = read_rttm_file(hypothesis)?;
            for (file, refs) in &r {
                let hyps = h.get(file).map(Vec::as_slice).unwrap_or(&[]);
                let d = der(refs, hyps, *collar)?;
                println!(
                    "{file}\tDER {:.2}\tFA {:.2}\tMISS {:.2}\tSPK {:.2}",
                    d.der, d.false_alarm, d.missed_speech, d.speaker_error
                );
            }
        }
        EvalCmd::Wer { reference, hypothesis } => {
            let tokens = |p: &Path| -> Result<BTreeMap<String, Vec<String>>> {
                let mut m: BTreeMap<String, Vec<String>> = BTreeMap::new();
                for rec in read_transcript_file(p)? {
                    m.entry(rec.session).or_default().extend(rec.tokens);
                }
                Ok(m)
            };
            let r = tokens(reference)?;
            let h = tokens(hypothesis)?;
            let mut total = mifi_core::metrics::EditCounts::default();
            for (s, words) in &r {
                let c = wer_session(words, h.get(s).map(Vec::as_slice).unwrap_or(&[]))?;
                let p = c.percentages::<f64>()?;
                println!(
                    "{s}\tWER {:.2}\tSUB {:.2}\tDEL {:.2}\tINS {:.2}",
                    p.wer, p.substitutions, p.deletions, p.insertions
                );
                total.reference_len += c.reference_len;
                total.substitutions += c.substitutions;
                total.deletions += c.deletions;
                total.insertions += c.insertions;
            }
            let p = total.percentages::<f64>()?;
            println!("pooled\tWER {:.2}\tSUB {:.2}\tDEL {:.2}\tINS {:.2}", p.wer, p.substitutions, p.deletions, p.insertions);
        }
        EvalCmd::F1 { reference, hypothesis } => {
            let therapist = |p: &Path| -> Result<Vec<mifi_core::types::Utterance>> {
                read_transcript_file(p)?
                    .iter()
                    .filter(|r| r.role == Role::Therapist)
                    .enumerate()
                    .map(|(i, r)| Ok(r.to_utterance(i)?))
                    .collect()
            };
            let r = therapist(reference)?;
            let h = therapist(hypothesis)?;
            if r.len() != h.len() {
                bail!("{} reference vs {} hypothesis therapist utterances", r.len(), h.len());
            }
            let (mut pred, mut truth) = (Vec::new(), Vec::new());
            for (ru, hu) in r.iter().zip(&h) {
                let Some(p) = hu.pred_code else { continue };
                if let Some(t) = resolve_stacked(p, &ru.ref_groups()) {
                    pred.push(p);
                    truth.push(t);
                }
            }
            let rep = f1_per_class(&pred, &truth)?;
            for (c, s) in &rep.per_class {
                println!("{c}\tP {:.3}\tR {:.3}\tF1 {:.3}\tn {}", s.precision, s.recall, s.f1, s.support);
            }
            println!("weighted F1 {:.3}\tmacro F1 {:.3}\taccuracy {:.3}", rep.weighted, rep.macro_f1, rep.accuracy);
        }
        EvalCmd::Alpha { ratings, level } => {
            let text = fs::read_to_string(ratings).with_context(|| format!("reading {}", ratings.display()))?;
            let mut items = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let row = line
                    .split(',')
                    .map(|c| match c.trim() {
                        "" | "NA" => Ok(None),
                        v => v.parse::<f64>().map(Some).with_context(|| format!("line {}: bad rating {v:?}", i + 1)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                items.push(row);
            }
            let a = krippendorff_alpha(&RaterMatrix::new(items), (*level).into())?;
            println!("alpha {a:.4}");
        }
    }
    Ok(())
}

fn train_lm(a: &TrainLmArgs) -> Result<()> {
    let mut cfg = TrainingConfig::default().lm;
    if let Some(o) = a.order {
        cfg.order = o;
    }
    if let Some(d) = a.discount {
        cfg.discount = d;
    }
    let mut data = TrainingData::default();
    for p in list_files(&a.data, ".jsonl")? {
        for rec in read_transcript_file(&p)? {
            match rec.role {
                Role::Therapist => data.therapist.push(rec.tokens),
                Role::Client => data.client.push(rec.tokens),
            }
        }
    }
    let roles: &[(&str, Option<Role>)] = match a.role {
        RoleArg::Therapist => &[("therapist", Some(Role::Therapist))],
        RoleArg::Client => &[("client", Some(Role::Client))],
        RoleArg::Background => &[("background", None)],
        RoleArg::All => &[
            ("therapist", Some(Role::Therapist)),
            ("client", Some(Role::Client)),
            ("background", None),
        ],
    };
    fs::create_dir_all(&a.out)?;
    for &(name, role) in roles {
        let m = NgramModel::train(&data.role_text(role), &cfg)?;
        let path = a.out.join(format!("{name}.arpa"));
        m.write_arpa(BufWriter::new(fs::File::create(&path)?))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn train_coder(a: &TrainCoderArgs) -> Result<()> {
    let data = TrainingData::from_synth(&read_sessions(&a.data)?);
    let cfg = TrainingConfig::default();
    fs::create_dir_all(&a.out)?;
    let coder = BaselineCoder::train(&data.coded, &cfg.coder)?;
    fs::write(a.out.join("coder.json"), coder.to_json()?)?;
    if data.sessions.len() >= mifi_core::code::MIN_TRAIN_SESSIONS {
        let g = GlobalRegressor::train(&data.sessions, &cfg.globals)?;
        fs::write(a.out.join("globals.json"), g.to_json()?)?;
    } else {
        warn!(
            "{} sessions is too few for the global score regressors; skipped",
            data.sessions.len()
        );
    }
    info!("wrote coder to {}", a.out.display());
    Ok(())
}

fn cv_globals(a: &CvArgs) -> Result<()> {
    let data = TrainingData::from_synth(&read_sessions(&a.data)?);
    let rep = crossvalidate_globals(&data.sessions, &TrainingConfig::default().globals, a.folds, a.seed)?;
    for (c, m) in &rep.per_code {
        println!(
            "{c}\taccuracy {:.3}\twithin-one {:.3}\tmacro F1 {:.3}\tMAE {:.3}",
            m.accuracy, m.within_one, m.macro_f1, m.mae
        );
    }
    if let Some(p) = &a.out {
        write_json(p, &rep)?;
    }
    Ok(())
}
