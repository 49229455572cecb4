//! End-to-end commands: each reads its inputs, writes a run manifest, then its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LinkConfig, PivBlock, PosteriorBlock, StemBlock};
use crate::data::LinkageData;
use crate::error::{Error, Result};
use crate::evaluate::{confusion, format_report, metrics, write_report, ConfusionCounts, Metrics};
use crate::independence::{ratio_grid, write_grid};
use crate::ingest::{encode_pair, MissingMarkers, PivSpec, RawTable, RecordTable, SupportMap, MISSING};
use crate::io::{read_raw_csv, sha256_file, write_atomic, write_csv};
use crate::kernels::ModelParams;
use crate::posterior::{
    sample_posterior, select_by_fdr, select_by_threshold, write_histogram, write_links, LinkSet,
    LinkagePosterior, PosteriorConfig,
};
use crate::simulate::{distortion_level, generate_scenario, inject_distortion, Distortion, GroundTruth, Scenario, ScenarioConfig};
use crate::stem::{export_trace, fit, FitResult, StemConfig};

pub const MANIFEST: &str = "manifest.json";
pub const TIME_COLUMN: &str = "time";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Threshold(f64),
    Fdr(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of a run: what was asked for, from which inputs, and what came out.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub results: BTreeMap<String, Value>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: Value, inputs: &[&Path], outputs: &[&str]) -> Result<Self> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            inputs: inputs
                .iter()
                .map(|p| {
                    Ok(InputDigest {
                        path: p.display().to_string(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect::<Result<_>>()?,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            results: BTreeMap::new(),
        })
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("manifest serialisation: {e}")))?;
        write_atomic(&out_dir.join(MANIFEST), |w| {
            w.write_all(text.as_bytes())?;
            w.write_all(b"\n")
        })
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

pub fn params_json(p: &ModelParams<f64>, specs: &[PivSpec]) -> Value {
    let per_piv: Vec<Value> = specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            json!({
                "name": s.name,
                "phi_mistake": p.phi_mistake[k],
                "alpha": p.alpha[k],
                "phi_missing_a": p.phi_missing_a[k],
                "phi_missing_b": p.phi_missing_b[k],
            })
        })
        .collect();
    json!({ "gamma": p.gamma, "pivs": per_piv })
}

/// Fits the model, samples the posterior and selects links.
pub fn link_data(
    data: &LinkageData,
    stem: &StemConfig,
    post: &PosteriorConfig,
    selection: Selection,
) -> Result<(FitResult<f64>, LinkagePosterior<f64>, LinkSet<f64>)> {
    let fitted = fit::<f64>(data, stem)?;
    let posterior = sample_posterior(data, &fitted.theta_hat, post)?;
    let links = match selection {
        Selection::Threshold(xi) => {
            if !(0.0..=1.0).contains(&xi) {
                return Err(Error::Argument(format!("threshold {xi} not in [0,1]")));
            }
            select_by_threshold(&posterior, xi)
        }
        Selection::Fdr(bound) => select_by_fdr(&posterior, bound)?,
    };
    Ok((fitted, posterior, links))
}

/// Loads both files named in a config and encodes them.
pub fn load_link_data(cfg: &LinkConfig) -> Result<(LinkageData, Vec<SupportMap>)> {
    let raw_a = read_raw_csv(&cfg.file_a)?;
    let raw_b = read_raw_csv(&cfg.file_b)?;
    let (a, b, specs, supports) = encode_pair(
        &raw_a,
        &raw_b,
        &cfg.piv_specs(),
        cfg.time_column.as_deref(),
        &cfg.missing(),
    )?;
    Ok((LinkageData::new(a, b, specs)?, supports))
}

#[derive(Debug, Clone)]
pub struct LinkOutcome {
    pub fit: FitResult<f64>,
    pub posterior: LinkagePosterior<f64>,
    pub links: LinkSet<f64>,
}

/// `link`: writes manifest.json, trace.csv, posterior_hist.csv and links.csv into `out_dir`.
pub fn command_link(config_path: &Path, out_dir: &Path, selection: Selection, seed: Option<u64>) -> Result<LinkOutcome> {
    let mut cfg = LinkConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (data, _) = load_link_data(&cfg)?;
    let outputs = ["trace.csv", "posterior_hist.csv", "links.csv"];
    let mut manifest = RunManifest::new(
        "link",
        cfg.seed,
        json!({ "link": to_json(&cfg), "selection": format!("{selection:?}") }),
        &[config_path, &cfg.file_a, &cfg.file_b],
        &outputs,
    )?;
    manifest.write(out_dir)?;

    let (fitted, posterior, links) = link_data(&data, &cfg.stem_config(), &cfg.posterior_config(), selection)?;
    let names: Vec<String> = data.specs.iter().map(|s| s.name.clone()).collect();
    export_trace(&fitted.trace, &names, &out_dir.join("trace.csv"))?;
    write_histogram(&posterior, &out_dir.join("posterior_hist.csv"))?;
    write_links(&links, &out_dir.join("links.csv"))?;

    let r = &mut manifest.results;
    r.insert("files_swapped".into(), json!(fitted.swapped));
    r.insert("theta_hat".into(), params_json(&fitted.theta_hat, &data.specs));
    r.insert("threshold".into(), json!(links.threshold));
    r.insert("estimated_fdr".into(), json!(links.estimated_fdr));
    r.insert("n_links".into(), json!(links.pairs.len()));
    manifest.write(out_dir)?;
    info!("{} links selected at threshold {}", links.pairs.len(), links.threshold);
    Ok(LinkOutcome {
        fit: fitted,
        posterior,
        links,
    })
}

fn table_to_raw(t: &RecordTable, names: &[String]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = names.to_vec();
    header.push(TIME_COLUMN.to_string());
    let times = t.times().unwrap_or(&[]);
    let rows = (0..t.n_records())
        .map(|r| {
            let mut row: Vec<String> = t
                .row(r)
                .iter()
                .map(|&c| if c == MISSING { String::new() } else { c.to_string() })
                .collect();
            row.push(times.get(r).map(|x| x.to_string()).unwrap_or_default());
            row
        })
        .collect();
    (header, rows)
}

fn write_pairs(path: &Path, pairs: &[(usize, usize)]) -> Result<()> {
    write_csv(
        path,
        &["row_index_a", "row_index_b"],
        pairs.iter().map(|(i, j)| [i.to_string(), j.to_string()]),
    )
}

/// Reads the first two columns of a pair file as 0-based row indices.
pub fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let raw = read_raw_csv(path)?;
    raw.rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let idx = |c: usize| -> Result<usize> {
                let cell = row.get(c).map(String::as_str).unwrap_or("");
                cell.trim().parse().map_err(|_| {
                    Error::Data(format!(
                        "{}: line {}: '{cell}' is not a row index",
                        path.display(),
                        r + 2
                    ))
                })
            };
            Ok((idx(0)?, idx(1)?))
        })
        .collect()
}

/// Link configuration matching a simulated scenario, instability modelled.
pub fn scenario_link_config(cfg: &ScenarioConfig) -> LinkConfig {
    LinkConfig {
        file_a: PathBuf::from("A.csv"),
        file_b: PathBuf::from("B.csv"),
        time_column: Some(TIME_COLUMN.to_string()),
        missing_markers: vec![String::new(), "NA".to_string()],
        seed: cfg.seed,
        pivs: cfg
            .model_specs(true, 0.0)
            .into_iter()
            .map(|s| PivBlock {
                name: s.name,
                stable: s.stable,
                soundex: false,
                mistake_bound: Some(s.mistake_bound),
            })
            .collect(),
        stem: StemBlock::default(),
        posterior: PosteriorBlock::default(),
    }
}

/// Reads a scenario TOML; omitted fields keep their defaults.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: ScenarioConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// `simulate`: writes A.csv, B.csv, truth.csv and a matching link.toml into `out_dir`.
pub fn command_simulate(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Scenario> {
    cfg.validate()?;
    let manifest = RunManifest::new(
        "simulate",
        cfg.seed,
        to_json(cfg),
        &[],
        &["A.csv", "B.csv", "truth.csv", "link.toml"],
    )?;
    manifest.write(out_dir)?;
    let s = generate_scenario(cfg)?;
    let names = cfg.piv_names();
    for (t, file) in [(&s.a, "A.csv"), (&s.b, "B.csv")] {
        let (header, rows) = table_to_raw(t, &names);
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&out_dir.join(file), &h, rows)?;
    }
    write_pairs(&out_dir.join("truth.csv"), &s.truth.pairs)?;
    let toml = toml::to_string(&scenario_link_config(cfg))
        .map_err(|e| Error::Numeric(format!("config serialisation: {e}")))?;
    write_atomic(&out_dir.join("link.toml"), |w| w.write_all(toml.as_bytes()))?;
    Ok(s)
}

/// `evaluate`: confusion counts and metrics of a link file against a truth file.
pub fn command_evaluate(links: &Path, truth: &Path, out: Option<&Path>) -> Result<(ConfusionCounts, Metrics, String)> {
    let est = read_pairs(links)?;
    let truth_pairs = read_pairs(truth)?;
    let c = confusion(&est, &truth_pairs);
    let m = metrics(&c);
    if let Some(path) = out {
        write_report(&c, &m, path)?;
    }
    Ok((c, m, format_report(&c, &m)))
}

struct EncodedDir {
    raw_a: RawTable,
    raw_b: RawTable,
    piv_cols: Vec<usize>,
    data_a: RecordTable,
    data_b: RecordTable,
    supports: Vec<SupportMap>,
    truth: GroundTruth,
}

fn encode_dir(dir: &Path, missing: &MissingMarkers) -> Result<EncodedDir> {
    let raw_a = read_raw_csv(&dir.join("A.csv"))?;
    let raw_b = read_raw_csv(&dir.join("B.csv"))?;
    let truth = GroundTruth {
        pairs: read_pairs(&dir.join("truth.csv"))?,
    };
    let piv_cols: Vec<usize> = (0..raw_a.header.len())
        .filter(|&c| raw_a.header[c] != TIME_COLUMN)
        .collect();
    let specs: Vec<PivSpec> = piv_cols
        .iter()
        .map(|&c| PivSpec::stable(raw_a.header[c].clone(), 1))
        .collect();
    let (data_a, data_b, _, supports) = encode_pair(&raw_a, &raw_b, &specs, None, missing)?;
    Ok(EncodedDir {
        raw_a,
        raw_b,
        piv_cols,
        data_a,
        data_b,
        supports,
        truth,
    })
}

/// `distort`: copies a simulated directory with extra distortion in file B. Returns the
/// distortion level before and after.
pub fn command_distort(in_dir: &Path, out_dir: &Path, level: f64, seed: u64) -> Result<(f64, f64)> {
    let inputs = [in_dir.join("A.csv"), in_dir.join("B.csv"), in_dir.join("truth.csv")];
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let extra = in_dir.join("link.toml");
    let mut outputs = vec!["A.csv", "B.csv", "truth.csv"];
    if extra.exists() {
        outputs.push("link.toml");
    }
    let mut manifest = RunManifest::new(
        "distort",
        seed,
        json!({ "level": level, "input_dir": in_dir.display().to_string() }),
        &input_refs,
        &outputs,
    )?;
    manifest.write(out_dir)?;

    let enc = encode_dir(in_dir, &MissingMarkers::default())?;
    let sizes: Vec<usize> = enc.supports.iter().map(SupportMap::len).collect();
    let before = distortion_level(&enc.data_a, &enc.data_b, &enc.truth)?;
    let (_, b) = inject_distortion(&enc.data_a, &enc.data_b, &sizes, &Distortion::new(level, seed))?;
    let after = distortion_level(&enc.data_a, &b, &enc.truth)?;

    let mut raw_b = enc.raw_b.clone();
    for (r, row) in raw_b.rows.iter_mut().enumerate() {
        for (k, &c) in enc.piv_cols.iter().enumerate() {
            let code = b.get(r, k);
            if code != enc.data_b.get(r, k) {
                row[c] = enc.supports[k].value(code).unwrap_or("").to_string();
            }
        }
    }
    for (raw, file) in [(&enc.raw_a, "A.csv"), (&raw_b, "B.csv")] {
        let h: Vec<&str> = raw.header.iter().map(String::as_str).collect();
        write_csv(&out_dir.join(file), &h, &raw.rows)?;
    }
    write_pairs(&out_dir.join("truth.csv"), &enc.truth.pairs)?;
    if extra.exists() {
        let text = std::fs::read(&extra).map_err(|e| Error::io(&extra, e))?;
        write_atomic(&out_dir.join("link.toml"), |w| w.write_all(&text))?;
    }
    manifest.results.insert("distortion_before".into(), json!(before));
    manifest.results.insert("distortion_after".into(), json!(after));
    manifest.write(out_dir)?;
    Ok((before, after))
}

/// `independence`: one grid CSV per `k`, named `ratio_k{k}.csv`.
pub fn command_independence(n_a: usize, ks: &[usize], cs: &[usize], n_bs: &[usize], out_dir: &Path) -> Result<Vec<Vec<Vec<f64>>>> {
    let names: Vec<String> = ks.iter().map(|k| format!("ratio_k{k}.csv")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    RunManifest::new(
        "independence",
        0,
        json!({ "n_a": n_a, "k": ks, "c": cs, "n_b": n_bs }),
        &[],
        &name_refs,
    )?
    .write(out_dir)?;
    ks.iter()
        .zip(&names)
        .map(|(&k, name)| {
            let grid = ratio_grid::<f64>(n_a, k, cs, n_bs)?;
            write_grid(cs, n_bs, &grid, &out_dir.join(name))?;
            Ok(grid)
        })
        .collect()
}
