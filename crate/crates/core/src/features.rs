//! Dataset manifests, the 23-entry feature vector, feature CSV files and
//! cached extraction.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::PointCloud;
use crate::color::PerceptualMode;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::metrics::graphsim::msgraphsim_score;
use crate::metrics::pcqm::{compute_pcqm_with, PerceptualConverter};
use crate::metrics::pointssim::{pointssim, Attribute};
use crate::metrics::psnr::{compute_d2, compute_yuv};
use crate::ply::parse_ply;

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "#pcqkit-features";

pub const FEATURE_NAMES: [&str; 23] = [
    "psnr_d2",
    "psnr_y",
    "psnr_u",
    "psnr_v",
    "pointssim_lum",
    "pointssim_geo",
    "pcqm_f1",
    "pcqm_f2",
    "pcqm_f3",
    "pcqm_f4",
    "pcqm_f5",
    "pcqm_f6",
    "pcqm_f7",
    "pcqm_f8",
    "msgsim_mg_s0",
    "msgsim_ug_s0",
    "msgsim_cg_s0",
    "msgsim_mg_s1",
    "msgsim_ug_s1",
    "msgsim_cg_s1",
    "msgsim_mg_s2",
    "msgsim_ug_s2",
    "msgsim_cg_s2",
];

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub group_id: String,
    /// Paths as written in the manifest.
    pub ref_name: String,
    pub dist_name: String,
    /// Paths resolved against the manifest directory.
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub mos: f64,
    pub mos_std: Option<f64>,
    pub codec: Option<String>,
    pub rate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    /// Distinct group ids in first-appearance order.
    pub fn groups(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.group_id.as_str()) {
                out.push(&r.group_id);
            }
        }
        out
    }

    /// Fails on the first row whose cloud files do not exist.
    pub fn check_paths(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            for p in [&r.ref_path, &r.dist_path] {
                if !p.is_file() {
                    return Err(Error::BadManifestRow {
                        row: i + 1,
                        reason: format!("file not found: {}", p.display()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn mos_std(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.mos_std).collect()
    }
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

fn optional_text(record: &csv::StringRecord, col: Option<usize>) -> Option<String> {
    col.and_then(|c| record.get(c))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

/// Parses a manifest CSV. Relative cloud paths resolve against `base_dir`.
/// Row numbers in errors count data rows from 1.
pub fn parse_manifest<R: Read>(reader: R, base_dir: &Path) -> Result<DatasetManifest> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let need = |names: &[&str], label: &str| column(&headers, names).ok_or_else(|| Error::MissingColumn(label.into()));
    let c_ref = need(&["ref_path", "ref"], "ref_path")?;
    let c_dist = need(&["dist_path", "dist"], "dist_path")?;
    let c_mos = need(&["mos"], "mos")?;
    let c_group = column(&headers, &["group_id", "group"]);
    let c_std = column(&headers, &["mos_std"]);
    let c_codec = column(&headers, &["codec"]);
    let c_rate = column(&headers, &["rate"]);

    let mut rows = Vec::new();
    let mut group_of_ref: HashMap<String, String> = HashMap::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let (ref_name, dist_name) = (field(c_ref), field(c_dist));
        if ref_name.is_empty() || dist_name.is_empty() {
            return Err(Error::BadManifestRow {
                row,
                reason: "empty ref or dist path".into(),
            });
        }
        let mos_text = field(c_mos);
        let mos: f64 = mos_text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or(Error::BadMosValue { row, value: mos_text })?;
        let mos_std = match optional_text(&record, c_std) {
            Some(t) => Some(t.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or(
                Error::BadManifestRow {
                    row,
                    reason: format!("bad mos_std `{t}`"),
                },
            )?),
            None => None,
        };
        let group_id = optional_text(&record, c_group).unwrap_or_else(|| {
            Path::new(&ref_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| ref_name.clone())
        });
        match group_of_ref.get(&ref_name) {
            Some(g) if *g != group_id => {
                return Err(Error::BadManifestRow {
                    row,
                    reason: format!("reference {ref_name} already belongs to group {g}, not {group_id}"),
                })
            }
            _ => {
                group_of_ref.insert(ref_name.clone(), group_id.clone());
            }
        }
        rows.push(ManifestRow {
            group_id,
            ref_path: base_dir.join(&ref_name),
            dist_path: base_dir.join(&dist_name),
            ref_name,
            dist_name,
            mos,
            mos_std,
            codec: optional_text(&record, c_codec),
            rate: optional_text(&record, c_rate),
        });
    }
    Ok(DatasetManifest { rows })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(file, base)
}

/// Feature values of one pair, ordered as [`FEATURE_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; 23],
    pub color_mode: PerceptualMode,
    /// True when at least one PSNR entry hit the cap.
    pub capped: bool,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Result<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::UnknownFeatureName(name.into()))
    }
}

/// Runs every metric on one pair.
pub fn compute_feature_vector(
    reference: &PointCloud,
    distorted: &PointCloud,
    config: &Config,
    converter: &PerceptualConverter,
) -> Result<FeatureVector> {
    if config.graphsim.scales < 3 {
        return Err(Error::Config("the feature vector needs three GraphSIM scales".into()));
    }
    let cap = config.psnr.cap_db;
    let d2 = compute_d2(reference, distorted, reference.peak(), config.normals.radius)?;
    let yuv = compute_yuv(reference, distorted, &config.psnr)?;
    let psnr = [d2, yuv.psnr_y, yuv.psnr_u, yuv.psnr_v];
    let capped = psnr.iter().any(|p| p.psnr_db >= cap);
    let lum = pointssim(reference, distorted, Attribute::Luminance, &config.pointssim)?;
    let geo = pointssim(reference, distorted, Attribute::Geometry, &config.pointssim)?;
    let pcqm = compute_pcqm_with(reference, distorted, &config.pcqm, converter)?;
    let gs = msgraphsim_score(reference, distorted, &config.graphsim)?;

    let mut values = [0.0; 23];
    for (k, p) in psnr.iter().enumerate() {
        values[k] = p.capped(cap);
    }
    values[4] = lum.score;
    values[5] = geo.score;
    values[6..14].copy_from_slice(&pcqm.features.f);
    for s in 0..3 {
        let sc = &gs.scales[s];
        values[14 + 3 * s..17 + 3 * s].copy_from_slice(&[sc.sim_mg, sc.sim_ug, sc.sim_cg]);
    }
    Ok(FeatureVector {
        values,
        color_mode: converter.mode,
        capped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub group_id: String,
    pub ref_name: String,
    pub dist_name: String,
    pub mos: f64,
    pub values: Vec<f64>,
}

/// A feature CSV in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub config_hash: String,
    pub extraction_hash: String,
    pub color_mode: String,
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            config_hash: String::new(),
            extraction_hash: String::new(),
            color_mode: String::new(),
            names,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingFeatureColumn(name.into()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.values[c]).collect())
    }

    /// Rows restricted to `names`, in that column order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n.as_ref()))
            .collect::<Result<_>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| cols.iter().map(|&c| r.values[c]).collect())
            .collect())
    }

    pub fn mos(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mos).collect()
    }

    pub fn groups(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.group_id.as_str()).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            ..FeatureTable::new(self.names.clone())
        }
        .with_provenance_of(self)
    }

    fn with_provenance_of(mut self, other: &FeatureTable) -> Self {
        self.config_hash = other.config_hash.clone();
        self.extraction_hash = other.extraction_hash.clone();
        self.color_mode = other.color_mode.clone();
        self
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let meta = |v: &str| if v.is_empty() { "-".to_string() } else { v.to_string() };
        writeln!(
            out,
            "{MAGIC} schema_version={SCHEMA_VERSION} config_hash={} extraction_hash={} color_mode={}",
            meta(&self.config_hash),
            meta(&self.extraction_hash),
            meta(&self.color_mode)
        )
        .map_err(|e| Error::io("<feature csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group_id", "ref", "dist", "mos"];
        header.extend(self.names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.group_id.clone(), r.ref_name.clone(), r.dist_name.clone(), r.mos.to_string()];
            rec.extend(r.values.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::io("<feature csv>", e))?;
        let mut tokens = first.split_whitespace();
        if tokens.next() != Some(MAGIC) {
            return Err(Error::BadFeatureTable("missing feature-file header line".into()));
        }
        let mut meta: HashMap<&str, &str> = HashMap::new();
        for t in tokens {
            if let Some((k, v)) = t.split_once('=') {
                meta.insert(k, v);
            }
        }
        let version = meta.get("schema_version").copied().unwrap_or("");
        if version != SCHEMA_VERSION.to_string() {
            return Err(Error::SchemaVersion(version.to_string()));
        }
        let take = |k: &str| meta.get(k).filter(|v| **v != "-").map_or(String::new(), |v| v.to_string());
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers()?.clone();
        let fixed: Vec<&str> = headers.iter().take(4).collect();
        if fixed != ["group_id", "ref", "dist", "mos"] {
            return Err(Error::BadFeatureTable(format!(
                "expected columns group_id,ref,dist,mos first, found {}",
                fixed.join(",")
            )));
        }
        let names: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in csv.records().enumerate() {
            let rec = rec?;
            let num = |t: &str| -> Result<f64> {
                t.parse()
                    .map_err(|_| Error::BadFeatureTable(format!("row {}: `{t}` is not a number", i + 1)))
            };
            if rec.len() != names.len() + 4 {
                return Err(Error::BadFeatureTable(format!("row {} has {} fields", i + 1, rec.len())));
            }
            rows.push(FeatureRow {
                group_id: rec[0].to_string(),
                ref_name: rec[1].to_string(),
                dist_name: rec[2].to_string(),
                mos: num(&rec[3])?,
                values: rec.iter().skip(4).map(num).collect::<Result<_>>()?,
            });
        }
        Ok(Self {
            config_hash: take("config_hash"),
            extraction_hash: take("extraction_hash"),
            color_mode: take("color_mode"),
            names,
            rows,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file).map_err(|e| match e {
            Error::BadFeatureTable(m) => Error::BadFeatureTable(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractionStats {
    pub computed: usize,
    pub cache_hits: usize,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn cache_key(ref_bytes: &[u8], dist_bytes: &[u8], extraction_hash: &str) -> String {
    let mut h = Sha256::new();
    h.update(Sha256::digest(ref_bytes));
    h.update(Sha256::digest(dist_bytes));
    h.update(extraction_hash.as_bytes());
    hex::encode(h.finalize())
}

fn cache_load(dir: &Path, key: &str) -> Option<FeatureVector> {
    let text = std::fs::read(dir.join(format!("{key}.json"))).ok()?;
    serde_json::from_slice(&text).ok()
}

fn cache_store(dir: &Path, key: &str, fv: &FeatureVector) -> Result<()> {
    let final_path = dir.join(format!("{key}.json"));
    let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
    let json = serde_json::to_vec(fv)?;
    std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &final_path).map_err(|e| Error::io(&final_path, e))
}

fn extract_row(
    row: &ManifestRow,
    config: &Config,
    converter: &PerceptualConverter,
    cache_dir: Option<&Path>,
    computed: &AtomicUsize,
    hits: &AtomicUsize,
) -> Result<FeatureVector> {
    let ref_bytes = read_bytes(&row.ref_path)?;
    let dist_bytes = read_bytes(&row.dist_path)?;
    let key = cache_key(&ref_bytes, &dist_bytes, &config.extraction_hash());
    if let Some(fv) = cache_dir.and_then(|d| cache_load(d, &key)) {
        hits.fetch_add(1, Ordering::Relaxed);
        return Ok(fv);
    }
    let reference = parse_ply(&ref_bytes, config.bit_depth)?;
    let distorted = parse_ply(&dist_bytes, config.bit_depth)?;
    let fv = compute_feature_vector(&reference, &distorted, config, converter)?;
    computed.fetch_add(1, Ordering::Relaxed);
    if let Some(d) = cache_dir {
        cache_store(d, &key, &fv)?;
    }
    Ok(fv)
}

/// Extracts features for every manifest row, in manifest order.
pub fn extract_features(
    manifest: &DatasetManifest,
    config: &Config,
    cache_dir: Option<&Path>,
) -> Result<(FeatureTable, ExtractionStats)> {
    if let Some(d) = cache_dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let converter = config.pcqm.converter()?;
    let computed = AtomicUsize::new(0);
    let hits = AtomicUsize::new(0);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = config.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<FeatureVector>> = pool.install(|| {
        manifest
            .rows
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                log::info!("extracting row {}: {}", i + 1, row.dist_name);
                extract_row(row, config, &converter, cache_dir, &computed, &hits)
                    .map_err(|e| e.at_row(i + 1, row.dist_name.clone()))
            })
            .collect()
    });
    let mut table = FeatureTable::new(feature_names());
    table.config_hash = config.hash();
    table.extraction_hash = config.extraction_hash();
    table.color_mode = match converter.mode {
        PerceptualMode::Cielab => "cielab".into(),
        PerceptualMode::Lab2000hl => "lab2000hl".into(),
    };
    for (row, fv) in manifest.rows.iter().zip(results) {
        let fv = fv?;
        table.rows.push(FeatureRow {
            group_id: row.group_id.clone(),
            ref_name: row.ref_name.clone(),
            dist_name: row.dist_name.clone(),
            mos: row.mos,
            values: fv.values.to_vec(),
        });
    }
    let stats = ExtractionStats {
        computed: computed.into_inner(),
        cache_hits: hits.into_inner(),
    };
    Ok((table, stats))
}
