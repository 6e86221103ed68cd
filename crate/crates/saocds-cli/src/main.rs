//! Command-line driver: encode inputs, compress models, run either engine,
//! compare them, sweep densities, and inspect cost models.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use saocds_core::compress::{apply_density_profile, LayerDensityReport};
use saocds_core::io::encode::{sigma_delta_encode, ModulatorOrder};
use saocds_core::io::gen::gen_bernoulli_input;
use saocds_core::io::model::ModelFile;
use saocds_core::io::trace::{load_trace, save_trace};
use saocds_core::metrics::{accumulation_ratio, latency_model, LatencyReport};
use saocds_core::network::{
    saocds_network_run, sw_network_run, Layer, NetworkRunOutput, NetworkSpec, RunMode,
};
use saocds_core::presets::default_network;
use saocds_core::schedule::build_schedule;
use saocds_core::spike::SpikeTensor;
use saocds_core::storage::{
    break_even_density, coo_storage_bits, dense_storage_bits, min_ci_bits, min_ri_bits,
};
use saocds_core::CostCounters;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "saocds", version, about = "Streaming SNN accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode analog sample rows into a spike trace with a sigma-delta
    /// modulator.
    Encode(EncodeArgs),
    /// Prune and requantize a model to a per-layer density profile.
    Compress(CompressArgs),
    /// Run a model over a spike trace and report costs.
    Run(RunArgs),
    /// Run both engines and verify they agree bit-for-bit.
    Compare(CompareArgs),
    /// Sweep uniform density and tabulate cost metrics as CSV.
    Sweep(SweepArgs),
    /// Static analysis of a model: storage, schedules, latency.
    Analyze(AnalyzeArgs),
    /// Write the default seeded benchmark model.
    InitModel(InitModelArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// CSV of samples in [-1, 1]: one row per channel, one column per pixel.
    #[arg(long)]
    iq: PathBuf,
    /// Oversampling ratio: timesteps produced per sample.
    #[arg(long, default_value_t = 64)]
    osr: usize,
    /// Modulator order (1 or 2).
    #[arg(long, default_value_t = 1)]
    order: u32,
    /// Output spike trace.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompressArgs {
    /// Source model file.
    #[arg(long)]
    model: PathBuf,
    /// Per-weighted-layer densities, dash separated (e.g. "25-20-15-20-25").
    /// Values above 1 are percentages; otherwise fractions.
    #[arg(long)]
    density: String,
    /// Fractional bits of the compressed model's weight format.
    #[arg(long, default_value_t = 8)]
    frac_bits: u32,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineChoice {
    /// Streaming engine over compressed kernels.
    Saocds,
    /// Dense sliding-window reference.
    Sw,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeChoice {
    Seq,
    Pipe,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input spike trace.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = EngineChoice::Saocds)]
    engine: EngineChoice,
    #[arg(long, value_enum, default_value_t = ModeChoice::Seq)]
    mode: ModeChoice,
    /// Write the output spike trace here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the JSON cost report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Capture final membrane potentials even if the model does not ask.
    #[arg(long)]
    potentials: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    /// Densities: comma list ("0.1,0.25,1") or range with step ("0.05..1:0.05").
    #[arg(long)]
    densities: String,
    /// Input spike rate for the generated Bernoulli trace.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Timesteps to simulate per density point.
    #[arg(long, default_value_t = 16)]
    t: usize,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Timesteps assumed by the latency model.
    #[arg(long, default_value_t = 85)]
    t: usize,
}

#[derive(Args)]
struct InitModelArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    frac_bits: u32,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Encode(a) => encode(a),
        Command::Compress(a) => compress(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Analyze(a) => analyze(a),
        Command::InitModel(a) => init_model(a),
    }
}

/// Writes to stdout, exiting quietly when the reader has gone away (for
/// example when the output is piped into `head`).
fn emit_raw(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(1);
    }
}

fn emit(text: &str) {
    emit_raw(text);
    emit_raw("\n");
}

fn load_model_file(path: &Path) -> Result<(ModelFile, NetworkSpec, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    let model = ModelFile::from_reader(&mut bytes.as_slice())
        .with_context(|| format!("parsing model {}", path.display()))?;
    let net = model
        .to_network()
        .with_context(|| format!("validating model {}", path.display()))?;
    Ok((model, net, sha256_hex(&bytes)))
}

fn load_trace_file(path: &Path) -> Result<(SpikeTensor, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading trace {}", path.display()))?;
    let trace = load_trace(&mut bytes.as_slice())
        .with_context(|| format!("parsing trace {}", path.display()))?;
    Ok((trace, sha256_hex(&bytes)))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn encode(args: EncodeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.iq)
        .with_context(|| format!("reading samples {}", args.iq.display()))?;
    let mut channels: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .with_context(|| format!("line {}: bad sample {cell:?}", lineno + 1))
            })
            .collect::<Result<_>>()?;
        channels.push(row);
    }
    let order = ModulatorOrder::from_u32(args.order)?;
    let (trace, stats) = sigma_delta_encode(&channels, args.osr, order)?;
    if stats.clipped > 0 {
        eprintln!("warning: {} samples clipped to [-1, 1]", stats.clipped);
    }
    let mut out = fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    save_trace(&mut out, &trace)?;
    emit(&format!(
        "encoded {} channels x {} pixels into {} timesteps -> {}",
        trace.channels(),
        trace.width(),
        trace.timesteps(),
        args.out.display()
    ));
    Ok(())
}

fn parse_density_profile(s: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split('-')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad density {p:?}"))
        })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        bail!("empty density profile");
    }
    // "25-20-15" reads as percentages; "0.25-0.2-0.15" as fractions.
    let percentages = vals.iter().any(|&v| v > 1.0);
    Ok(vals
        .into_iter()
        .map(|v| if percentages { v / 100.0 } else { v })
        .collect())
}

#[derive(Serialize)]
struct CompressReport<'a> {
    source_model_sha256: &'a str,
    frac_bits: u32,
    layers: &'a [LayerDensityReport],
}

fn compress(args: CompressArgs) -> Result<()> {
    let (model, _net, sha) = load_model_file(&args.model)?;
    let profile = parse_density_profile(&args.density)?;
    let (compressed, reports) = apply_density_profile(&model, &profile, args.frac_bits)?;
    fs::write(&args.out, compressed.to_json_string())
        .with_context(|| format!("writing {}", args.out.display()))?;
    let report = CompressReport {
        source_model_sha256: &sha,
        frac_bits: args.frac_bits,
        layers: &reports,
    };
    emit(&serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct Provenance {
    model_sha256: String,
    input_sha256: String,
    engine: String,
    mode: String,
    frac_bits: u32,
}

#[derive(Serialize)]
struct ShapeInfo {
    timesteps: usize,
    channels: usize,
    width: usize,
}

#[derive(Serialize)]
struct LayerCost {
    layer: usize,
    kind: String,
    counters: CostCounters,
}

#[derive(Serialize)]
struct RunReport {
    provenance: Provenance,
    input_shape: ShapeInfo,
    output_shape: ShapeInfo,
    input_spikes: u64,
    output_spikes: u64,
    per_layer: Vec<LayerCost>,
    totals: CostCounters,
    total_bit_traffic: u64,
    latency: LatencyReport,
    /// Raw fixed-point membrane potentials of the last layer, if captured.
    final_potentials: Option<Vec<i32>>,
    /// Index of the most charged output neuron, if potentials were captured.
    prediction: Option<usize>,
}

fn shape_of(t: &SpikeTensor) -> ShapeInfo {
    ShapeInfo {
        timesteps: t.timesteps(),
        channels: t.channels(),
        width: t.width(),
    }
}

fn build_report(
    net: &NetworkSpec,
    result: &NetworkRunOutput,
    input: &SpikeTensor,
    provenance: Provenance,
) -> RunReport {
    let per_layer = result
        .per_layer
        .iter()
        .zip(net.layers())
        .enumerate()
        .map(|(i, (c, l))| LayerCost {
            layer: i,
            kind: l.kind().to_string(),
            counters: *c,
        })
        .collect();
    let totals = result.totals();
    let prediction = result.final_potentials.as_ref().map(|pots| {
        pots.iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    });
    RunReport {
        provenance,
        input_shape: shape_of(input),
        output_shape: shape_of(&result.output),
        input_spikes: input.count_ones(),
        output_spikes: result.output.count_ones(),
        per_layer,
        totals,
        total_bit_traffic: totals.bit_traffic(),
        latency: result.latency.clone(),
        final_potentials: result.final_potentials.clone(),
        prediction,
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (_model, mut net, model_sha) = load_model_file(&args.model)?;
    if args.potentials {
        net.report_final_potentials = true;
    }
    let (input, input_sha) = load_trace_file(&args.input)?;
    let (engine, mode) = match args.engine {
        EngineChoice::Saocds => (
            "saocds",
            match args.mode {
                ModeChoice::Seq => "sequential",
                ModeChoice::Pipe => "pipelined",
            },
        ),
        EngineChoice::Sw => {
            if args.mode == ModeChoice::Pipe {
                bail!("the reference engine only runs sequentially");
            }
            ("sw", "sequential")
        }
    };
    let result = match args.engine {
        EngineChoice::Saocds => {
            let mode = match args.mode {
                ModeChoice::Seq => RunMode::Sequential,
                ModeChoice::Pipe => RunMode::Pipelined,
            };
            saocds_network_run(&net, &input, mode, false)?
        }
        EngineChoice::Sw => sw_network_run(&net, &input, false)?,
    };

    if let Some(out) = &args.out {
        let mut f =
            fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
        save_trace(&mut f, &result.output)?;
    }

    let report = build_report(
        &net,
        &result,
        &input,
        Provenance {
            model_sha256: model_sha,
            input_sha256: input_sha,
            engine: engine.to_string(),
            mode: mode.to_string(),
            frac_bits: net.frac_bits(),
        },
    );
    let json = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => {
            fs::write(path, json + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            emit(&format!(
                "{engine}/{mode}: {} output spikes, {} total cycles, report -> {}",
                report.output_spikes,
                report.latency.total_cycles,
                path.display()
            ));
        }
        None => emit(&json),
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let (_model, mut net, _sha) = load_model_file(&args.model)?;
    net.report_final_potentials = true;
    let (input, _input_sha) = load_trace_file(&args.input)?;
    let st = saocds_network_run(&net, &input, RunMode::Sequential, true)?;
    let sw = sw_network_run(&net, &input, true)?;

    emit(&format!(
        "{:<6} {:<9} {:^21} {:^21} {:^21} {:^21}",
        "layer", "kind", "in-fetch s/w", "w-fetch s/w", "accum s/w", "traffic s/w"
    ));
    for (i, layer) in net.layers().iter().enumerate() {
        let (a, b) = (&st.per_layer[i], &sw.per_layer[i]);
        emit(&format!(
            "{:<6} {:<9} {:>10}/{:<10} {:>10}/{:<10} {:>10}/{:<10} {:>10}/{:<10}",
            i,
            layer.kind(),
            a.input_fetches,
            b.input_fetches,
            a.weight_fetches,
            b.weight_fetches,
            a.accumulations,
            b.accumulations,
            a.bit_traffic(),
            b.bit_traffic()
        ));
    }

    let st_layers = st.layer_outputs.as_ref().expect("captured");
    let sw_layers = sw.layer_outputs.as_ref().expect("captured");
    for (li, (a, b)) in st_layers.iter().zip(sw_layers).enumerate() {
        if a != b {
            for t in 0..a.timesteps() {
                for c in 0..a.channels() {
                    for x in 0..a.width() {
                        if a.get(t, c, x) != b.get(t, c, x) {
                            emit(&format!(
                                "MISMATCH: layer {li} t={t} channel={c} pixel={x}: \
                                 streaming={} reference={}",
                                a.get(t, c, x) as u8,
                                b.get(t, c, x) as u8
                            ));
                            std::process::exit(1);
                        }
                    }
                }
            }
        }
    }
    if st.final_potentials != sw.final_potentials {
        emit("MISMATCH: final membrane potentials differ");
        std::process::exit(1);
    }
    emit(&format!(
        "engines agree: {} layers, {} timesteps, {} output spikes",
        net.layers().len(),
        input.timesteps(),
        st.output.count_ones()
    ));
    Ok(())
}

fn parse_densities(s: &str) -> Result<Vec<f64>> {
    if let Some((range, step)) = s.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .context("range must look like lo..hi:step")?;
        let lo: f64 = lo.trim().parse().context("bad range start")?;
        let hi: f64 = hi.trim().parse().context("bad range end")?;
        let step: f64 = step.trim().parse().context("bad range step")?;
        if step <= 0.0 || hi < lo {
            bail!("range must ascend with positive step");
        }
        let mut out = Vec::new();
        let mut d = lo;
        while d <= hi + 1e-9 {
            out.push(d.min(1.0));
            d += step;
        }
        Ok(out)
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad density {p:?}"))
            })
            .collect()
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (model, net, _sha) = load_model_file(&args.model)?;
    let densities = parse_densities(&args.densities)?;
    let weighted = net
        .layers()
        .iter()
        .filter(|l| !matches!(l, Layer::MaxPool(_)))
        .count();

    let mut csv = String::from(
        "density,layer,kind,weights,nnz,reps,empty,extra,acc_saocds,acc_dense,acc_ratio,cycles,bottleneck\n",
    );
    for &density in &densities {
        let (m, _) = apply_density_profile(&model, &vec![density; weighted], model.frac_bits)?;
        let pruned = m.to_network()?;
        let input = gen_bernoulli_input(
            args.t,
            pruned.input_channels(),
            pruned.input_width(),
            args.rate,
            args.seed,
        )?;
        let st = saocds_network_run(&pruned, &input, RunMode::Sequential, false)?;
        let sw = sw_network_run(&pruned, &input, false)?;
        let lat = latency_model(&pruned, args.t as u64);
        for (i, layer) in pruned.layers().iter().enumerate() {
            let (a, b) = (&st.per_layer[i], &sw.per_layer[i]);
            let ratio = accumulation_ratio(a, b)
                .map(|r| format!("{r:.6}"))
                .unwrap_or_default();
            let (weights, nnz, reps, empty, extra) = match layer {
                Layer::Conv(spec) => {
                    let s = build_schedule(&spec.kernel);
                    (
                        spec.kernel.dims().weight_count().to_string(),
                        spec.kernel.nnz().to_string(),
                        s.reps().to_string(),
                        s.n_empty().to_string(),
                        s.n_extra().to_string(),
                    )
                }
                Layer::Fc(spec) => (
                    (spec.weights.in_width() * spec.weights.out_width()).to_string(),
                    spec.weights.nonzero_count().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ),
                Layer::MaxPool(_) => Default::default(),
            };
            csv.push_str(&format!(
                "{density},{i},{},{weights},{nnz},{reps},{empty},{extra},{},{},{ratio},{},{}\n",
                layer.kind(),
                a.accumulations,
                b.accumulations,
                lat.per_layer[i].cycles_per_timestep,
                (lat.bottleneck == i) as u8
            ));
        }
    }
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            emit(&format!(
                "swept {} densities over {} layers -> {}",
                densities.len(),
                net.layers().len(),
                path.display()
            ));
        }
        None => emit_raw(&csv),
    }
    Ok(())
}

#[derive(Serialize)]
struct StorageInfo {
    ri_bits: u32,
    ci_bits: u32,
    dense_bits: u64,
    coo_bits: u64,
    break_even_density: f64,
}

#[derive(Serialize)]
struct LayerAnalysis {
    layer: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nnz: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empty: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    storage: Option<StorageInfo>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    frac_bits: u32,
    input_channels: usize,
    input_width: usize,
    layers: Vec<LayerAnalysis>,
    latency: LatencyReport,
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let (_model, net, _sha) = load_model_file(&args.model)?;
    let mut layers = Vec::with_capacity(net.layers().len());
    for (i, layer) in net.layers().iter().enumerate() {
        let mut info = LayerAnalysis {
            layer: i,
            kind: layer.kind().to_string(),
            weights: None,
            nnz: None,
            density: None,
            reps: None,
            empty: None,
            extra: None,
            window: None,
            storage: None,
        };
        match layer {
            Layer::Conv(spec) => {
                let dims = spec.kernel.dims();
                let s = build_schedule(&spec.kernel);
                let (ri, ci) = (min_ri_bits(dims), min_ci_bits(dims));
                info.weights = Some(dims.weight_count());
                info.nnz = Some(spec.kernel.nnz());
                info.density = Some(spec.kernel.density());
                info.reps = Some(s.reps());
                info.empty = Some(s.n_empty());
                info.extra = Some(s.n_extra());
                info.storage = Some(StorageInfo {
                    ri_bits: ri,
                    ci_bits: ci,
                    dense_bits: dense_storage_bits(dims.weight_count(), 16),
                    coo_bits: coo_storage_bits(&spec.kernel, 16, ri, ci)?,
                    break_even_density: break_even_density(16, ri, ci),
                });
            }
            Layer::Fc(spec) => {
                info.weights = Some(spec.weights.in_width() * spec.weights.out_width());
                info.nnz = Some(spec.weights.nonzero_count());
                info.density = Some(spec.weights.density());
            }
            Layer::MaxPool(spec) => {
                info.window = Some(spec.window);
            }
        }
        layers.push(info);
    }
    let report = AnalyzeReport {
        frac_bits: net.frac_bits(),
        input_channels: net.input_channels(),
        input_width: net.input_width(),
        layers,
        latency: latency_model(&net, args.t as u64),
    };
    emit(&serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn init_model(args: InitModelArgs) -> Result<()> {
    let net = default_network(args.seed, args.frac_bits);
    let text = ModelFile::from_network(&net).to_json_string();
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    emit(&format!(
        "wrote default model (seed {}, {} fractional bits) -> {}",
        args.seed,
        args.frac_bits,
        args.out.display()
    ));
    Ok(())
}
