use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use mixbasis::analysis::{
    consensus_matrix, consensus_select, default_grid, density_curve, histogram_of, mode_of, permuted_accuracy,
    snapshot_mutual_information, theta_map_from_gh, ConsensusAccumulator, ConsensusMatrix,
};
use mixbasis::basis::{precompute_phi, BasisSpec, PhiTensor};
use mixbasis::data::{load_csv, Dataset, TransformSpec};
use mixbasis::em::{fit_em as run_em, hard_assign, EmOptions};
use mixbasis::oracle::exact_posterior;
use mixbasis::sampler::io::{write_samples, JsonlWriter, SampleReader};
use mixbasis::sampler::{
    run_sampler_with, GibbsState, Init, KPrior, SampleHeader, SampleSet, SampleSink, SamplerOptions, Snapshot,
};
use mixbasis::synth::{generate, small_spec, synth1_spec, synth2_spec};
use mixbasis::Error;

use crate::output::{ensure_dir, write_csv, write_json, Provenance};
use crate::{AnalyzeArgs, Benchmark, FitEmArgs, FitGibbsArgs, InputArgs, OracleArgs, SynthArgs, TransformArgs};

fn load_input(args: &InputArgs) -> Result<Dataset> {
    let data =
        load_csv(&args.input, !args.no_header).with_context(|| format!("reading {}", args.input.display()))?;
    match &args.transform {
        None => Ok(data),
        Some(spec) => {
            let spec: TransformSpec = spec.parse()?;
            Ok(data.transformed(&spec)?)
        }
    }
}

/// `item=spec` when an `=` comes before any `:`.
fn split_item(s: &str) -> Option<(&str, &str)> {
    let eq = s.find('=')?;
    match s.find(':') {
        Some(colon) if colon < eq => None,
        _ => Some((&s[..eq], &s[eq + 1..])),
    }
}

fn resolve_bases(args: &[String], names: &[String]) -> Result<Vec<BasisSpec>> {
    let mut global: Option<BasisSpec> = None;
    let mut per_item: Vec<Option<BasisSpec>> = vec![None; names.len()];
    for s in args {
        match split_item(s) {
            Some((name, spec)) => {
                let j = names
                    .iter()
                    .position(|n| n == name.trim())
                    .ok_or_else(|| Error::Config(format!("--basis names unknown item `{name}`")))?;
                per_item[j] = Some(spec.parse()?);
            }
            None => global = Some(s.parse()?),
        }
    }
    per_item
        .into_iter()
        .zip(names)
        .map(|(b, name)| {
            b.or_else(|| global.clone())
                .ok_or_else(|| Error::Config(format!("no basis given for item `{name}`")).into())
        })
        .collect()
}

fn read_truth(path: &Path) -> Result<Vec<usize>> {
    let d = load_csv(path, true).with_context(|| format!("reading {}", path.display()))?;
    let last = d.n_items() - 1;
    Ok(d.column(last).iter().map(|&v| v as usize).collect())
}

fn write_densities(
    dir: &Path,
    prov: &Provenance,
    theta: &[Vec<Vec<f64>>],
    specs: &[BasisSpec],
    names: &[String],
    points: usize,
) -> Result<()> {
    let dir = dir.join("densities");
    ensure_dir(&dir)?;
    for (r, rows) in theta.iter().enumerate() {
        for (j, th) in rows.iter().enumerate() {
            let grid = default_grid(&specs[j], points);
            let curve = density_curve(th, &specs[j], &grid)?;
            let path = dir.join(format!("component_{}_{}.csv", r + 1, names[j]));
            let rows = curve.grid.iter().zip(&curve.values).map(|(x, v)| [*x, *v]);
            write_csv(&path, prov, &["x", "density"], rows)?;
        }
    }
    Ok(())
}

fn write_labels(path: &Path, prov: &Provenance, labels: impl Iterator<Item = usize>) -> Result<()> {
    let rows = labels.enumerate().map(|(i, g)| [i + 1, g + 1]);
    write_csv(path, prov, &["index", "label"], rows)
}

fn write_histogram(path: &Path, prov: &Provenance, hist: &BTreeMap<usize, f64>) -> Result<()> {
    let rows = hist.iter().map(|(k, f)| [k.to_string(), f.to_string()]);
    write_csv(path, prov, &["k", "frequency"], rows)
}

pub fn transform(args: &TransformArgs) -> Result<()> {
    let prov = Provenance::new("transform", 0, args)?;
    let data = load_input(&args.input)?;
    ensure_dir(&args.output_dir)?;
    let path = args.output_dir.join("transformed.csv");
    let names: Vec<&str> = data.item_names().iter().map(String::as_str).collect();
    let rows = (0..data.n_obs()).map(|i| data.row(i).to_vec());
    if args.input.no_header {
        let file = std::fs::File::create(&path)?;
        let mut out = std::io::BufWriter::new(file);
        use std::io::Write;
        writeln!(out, "{}", prov.comment())?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
    } else {
        write_csv(&path, &prov, &names, rows)?;
    }
    println!("wrote {} ({} x {})", path.display(), data.n_obs(), data.n_items());
    Ok(())
}

pub fn fit_em(args: &FitEmArgs) -> Result<()> {
    let prov = Provenance::new("fit-em", args.seed, args)?;
    let data = load_input(&args.input)?;
    let specs = resolve_bases(&args.model.basis, data.item_names())?;
    let phi = precompute_phi(&data, &specs)?;
    let opts = EmOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        restarts: args.restarts,
        seed: args.seed,
    };
    let fit = run_em(&phi, args.k, &opts)?;
    if !fit.starved.is_empty() {
        eprintln!(
            "warning: components {:?} received no responsibility and were reset to uniform",
            fit.starved.iter().map(|r| r + 1).collect::<Vec<_>>()
        );
    }
    if !fit.converged {
        eprintln!("warning: EM stopped after {} iterations without converging", fit.iters);
    }
    let labels = hard_assign(&fit.resp);
    ensure_dir(&args.output_dir)?;
    write_labels(&args.output_dir.join("assignments.csv"), &prov, labels.iter().copied())?;
    let theta = fit.params.theta_nested();
    write_densities(&args.output_dir, &prov, &theta, &specs, data.item_names(), args.grid_points)?;

    let mut result = json!({
        "items": data.item_names(),
        "basis": specs.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "fit": fit.to_json(),
        "restart": fit.restart,
        "starved": fit.starved,
        "trace": fit.trace,
    });
    if let Some(truth) = &args.truth {
        let acc = permuted_accuracy(&labels, &read_truth(truth)?);
        result["accuracy"] = json!(acc);
        println!("accuracy {acc:.4}");
    }
    write_json(&args.output_dir.join("fit.json"), &prov, result)?;
    println!(
        "k={} log_post={:.6} iters={} converged={} restart={}",
        args.k, fit.log_post, fit.iters, fit.converged, fit.restart
    );
    Ok(())
}

/// Sends each recorded state to the sample file and the running summaries.
struct StreamSink<W: std::io::Write> {
    writer: JsonlWriter<W>,
    consensus: ConsensusAccumulator,
    ks: Vec<usize>,
}

impl<W: std::io::Write> SampleSink for StreamSink<W> {
    fn record(&mut self, sweep: u64, state: &GibbsState) -> mixbasis::Result<()> {
        self.writer.record(sweep, state)?;
        let labels: Vec<u32> = state.labels().into_iter().map(|g| g as u32).collect();
        self.consensus.add(&labels)?;
        self.ks.push(state.k());
        Ok(())
    }
}

fn closest_in_file(path: &Path, c: &ConsensusMatrix) -> Result<Snapshot> {
    let mut best: Option<(f64, Snapshot)> = None;
    for snap in SampleReader::open(path)? {
        let snap = snap?;
        let d = c.distance(&snap.labels);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, snap));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::Data("sample file holds no samples".into()).into())
}

pub fn fit_gibbs(args: &FitGibbsArgs) -> Result<()> {
    let prov = Provenance::new("fit-gibbs", args.seed, args)?;
    if args.sweeps == 0 {
        return Err(Error::Config("--sweeps 0: nothing to sample".into()).into());
    }
    let data = load_input(&args.input)?;
    let specs = resolve_bases(&args.model.basis, data.item_names())?;
    let phi = precompute_phi(&data, &specs)?;
    let prior: KPrior = args.prior.parse()?;
    let init: Init = args.init.parse()?;
    let budget = args.memory_budget_mb.saturating_mul(1 << 20);
    let opts = SamplerOptions {
        burn_in_sweeps: args.burn_in,
        sample_sweeps: args.sweeps,
        stride: args.stride,
        seed: args.seed,
        stream: 0,
        init,
        memory_budget: budget,
    };
    let n = phi.n_obs();
    let consensus_bytes = ConsensusMatrix::bytes_for(n);
    ensure_dir(&args.output_dir)?;
    let samples_path = args.output_dir.join("samples.jsonl");
    let header = SampleHeader::new(&phi, &prior, &opts);
    let mut extra = prov.fields();
    extra.insert("items".into(), json!(data.item_names()));
    extra.insert(
        "basis".into(),
        json!(specs.iter().map(ToString::to_string).collect::<Vec<_>>()),
    );

    let (stats, ks, rep) = if args.stream_consensus {
        if consensus_bytes > budget {
            return Err(Error::Guard(format!(
                "the consensus matrix for N = {n} needs {consensus_bytes} bytes, over the {budget} byte budget"
            ))
            .into());
        }
        let mut sink = StreamSink {
            writer: JsonlWriter::create(&samples_path, &header, &extra)?,
            consensus: ConsensusAccumulator::new(n),
            ks: Vec::new(),
        };
        let stats = run_sampler_with(&phi, &prior, &opts, &mut sink)?;
        sink.writer.finish()?;
        let c = sink.consensus.finish()?;
        let rep = closest_in_file(&samples_path, &c)?;
        (stats, sink.ks, rep)
    } else {
        let need = opts.storage_bytes(n, phi.n_items()).saturating_add(consensus_bytes);
        if need > budget {
            return Err(Error::Guard(format!(
                "holding {} samples and the consensus matrix needs about {need} bytes, over the {budget} byte \
                 budget; rerun with --stream-consensus or a larger --stride",
                opts.n_records()
            ))
            .into());
        }
        let mut set = SampleSet {
            header: header.clone(),
            samples: Vec::new(),
        };
        let stats = run_sampler_with(&phi, &prior, &opts, &mut set)?;
        write_samples(&samples_path, &set, &extra)?;
        let c = consensus_matrix(&set)?;
        let idx = consensus_select(&set, &c)?;
        let ks = set.samples.iter().map(|s| s.k).collect();
        let rep = set.samples.swap_remove(idx);
        (stats, ks, rep)
    };

    let hist = histogram_of(ks)?;
    let map_k = mode_of(&hist);
    write_histogram(&args.output_dir.join("k_histogram.csv"), &prov, &hist)?;
    write_labels(
        &args.output_dir.join("consensus.csv"),
        &prov,
        rep.labels.iter().map(|&g| g as usize),
    )?;
    let theta = theta_map_from_gh(&rep, phi.sizes());
    write_densities(&args.output_dir, &prov, &theta, &specs, data.item_names(), args.grid_points)?;

    let mut summary = json!({
        "items": data.item_names(),
        "map_k": map_k,
        "k_histogram": hist.iter().map(|(k, f)| json!([k, f])).collect::<Vec<_>>(),
        "representative": { "sweep": rep.sweep, "k": rep.k },
        "theta": theta,
        "steps": stats.steps,
        "seconds": stats.seconds,
        "steps_per_second": stats.steps_per_second,
    });
    if let Some(truth) = &args.truth {
        let labels: Vec<usize> = rep.labels.iter().map(|&g| g as usize).collect();
        let acc = permuted_accuracy(&labels, &read_truth(truth)?);
        summary["accuracy"] = json!(acc);
        println!("accuracy {acc:.4}");
    }
    write_json(&args.output_dir.join("summary.json"), &prov, summary)?;
    println!(
        "map_k={map_k} representative_k={} steps/s={:.3e}",
        rep.k, stats.steps_per_second
    );
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let reader = SampleReader::open(&args.samples)?;
    let header = reader.header().clone();
    let names: Vec<String> = reader
        .extra()
        .get("items")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_owned)).collect())
        .filter(|v: &Vec<String>| v.len() == header.n_items)
        .unwrap_or_else(|| (1..=header.n_items).map(|j| format!("item_{j}")).collect());
    let prov = Provenance::new("analyze", header.seed, args)?;

    let mut consensus = ConsensusAccumulator::new(header.n_obs);
    let mut ks = Vec::new();
    let mut mi = vec![0.0; header.n_items];
    for snap in reader {
        let snap = snap?;
        consensus.add(&snap.labels)?;
        ks.push(snap.k);
        for (j, acc) in mi.iter_mut().enumerate() {
            *acc += snapshot_mutual_information(&snap, j, header.sizes[j]);
        }
    }
    let count = ks.len();
    let hist = histogram_of(ks)?;
    mi.iter_mut().for_each(|v| *v /= count as f64);
    let c = consensus.finish()?;
    let rep = closest_in_file(&args.samples, &c)?;

    ensure_dir(&args.output_dir)?;
    let mut ranked: Vec<(usize, f64)> = mi.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    write_csv(
        &args.output_dir.join("mi.csv"),
        &prov,
        &["item", "bits"],
        ranked.iter().map(|(j, b)| [names[*j].clone(), b.to_string()]),
    )?;
    write_labels(
        &args.output_dir.join("consensus.csv"),
        &prov,
        rep.labels.iter().map(|&g| g as usize),
    )?;
    write_histogram(&args.output_dir.join("k_histogram.csv"), &prov, &hist)?;
    write_json(
        &args.output_dir.join("analysis.json"),
        &prov,
        json!({
            "samples": count,
            "map_k": mode_of(&hist),
            "representative": { "sweep": rep.sweep, "k": rep.k },
            "mutual_information": names.iter().zip(&mi).map(|(n, b)| json!([n, b])).collect::<Vec<_>>(),
        }),
    )?;
    for (j, bits) in ranked {
        println!("{}\t{bits:.4}", names[j]);
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match args.which {
        Benchmark::Synth1 => synth1_spec(),
        Benchmark::Synth2 => synth2_spec(),
        Benchmark::Small => small_spec(args.n),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let prov = Provenance::new("synth", spec.seed, args)?;
    let out = generate(&spec)?;
    ensure_dir(&args.output_dir)?;
    let names: Vec<&str> = out.data.item_names().iter().map(String::as_str).collect();
    write_csv(
        &args.output_dir.join("data.csv"),
        &prov,
        &names,
        (0..out.data.n_obs()).map(|i| out.data.row(i).to_vec()),
    )?;
    let rows = out.labels.iter().enumerate().map(|(i, g)| [i + 1, g + 1]);
    write_csv(&args.output_dir.join("truth.csv"), &prov, &["index", "group"], rows)?;
    println!("wrote {} observations to {}", out.data.n_obs(), args.output_dir.display());
    Ok(())
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let data = load_input(&args.input)?;
    let specs = resolve_bases(&args.model.basis, data.item_names())?;
    let phi: PhiTensor = precompute_phi(&data, &specs)?;
    let prior: KPrior = args.prior.parse()?;
    let post = exact_posterior(&phi, &prior)?;
    let v = json!({
        "k_marginal": post.k_marginal,
        "coassign": post.coassign,
        "log_evidence": post.log_evidence,
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}
