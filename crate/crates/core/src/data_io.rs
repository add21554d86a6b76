//! Embedding banks: class-grouped, nonnegative `f32` feature vectors, with
//! the `EMB1` binary format, a CSV format, and a synthetic generator.
//!
//! `EMB1` layout (all integers u32 little-endian, floats f32 little-endian):
//!
//! ```text
//! "EMB1" | class_count | dim | total_vector_count
//! class_count x { name_len | name (UTF-8) | vectors_in_class }
//! vectors grouped by class in table order, dim floats each
//! provenance_len | provenance (UTF-8)
//! ```
//!
//! CSV: header `label,v0,...,v{dim-1}`, one row per vector, floats written
//! with 9 significant digits so every `f32` survives a round trip. Classes are
//! ordered by first appearance. CSV carries no provenance.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankFormat {
    Binary,
    Csv,
}

impl BankFormat {
    /// `.csv` means CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => BankFormat::Csv,
            _ => BankFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Clamp negative entries to zero (with a warning) instead of rejecting.
    pub allow_negative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankClass {
    pub name: String,
    /// Row-major, `len() == count * dim`.
    pub vectors: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBank {
    dim: usize,
    classes: Vec<BankClass>,
    provenance: String,
}

impl EmbeddingBank {
    /// Enforces the bank invariants: `dim > 0`, at least one class, every class
    /// nonempty with whole vectors, all entries finite and nonnegative.
    pub fn new(dim: usize, classes: Vec<BankClass>, provenance: String) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBank("dim must be positive".into()));
        }
        if classes.is_empty() {
            return Err(Error::InvalidBank("bank has no classes".into()));
        }
        for class in &classes {
            if class.vectors.is_empty() {
                return Err(Error::EmptyBankClass(class.name.clone()));
            }
            if class.vectors.len() % dim != 0 {
                return Err(Error::BankDimMismatch(format!(
                    "class {:?} holds {} floats, not a multiple of dim {dim}",
                    class.name,
                    class.vectors.len()
                )));
            }
            for (k, &v) in class.vectors.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry {
                        class: class.name.clone(),
                        index: k / dim,
                    });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        class: class.name.clone(),
                        index: k / dim,
                        component: k % dim,
                        value: v,
                    });
                }
            }
        }
        Ok(Self {
            dim,
            classes,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[BankClass] {
        &self.classes
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.name.as_str())
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.classes[class].vectors.len() / self.dim
    }

    pub fn total_vectors(&self) -> usize {
        (0..self.n_classes()).map(|c| self.class_len(c)).sum()
    }

    pub fn vector(&self, class: usize, index: usize) -> &[f32] {
        &self.classes[class].vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

fn clamp_negatives(classes: &mut [BankClass], dim: usize) {
    let mut clamped = 0usize;
    for class in classes.iter_mut() {
        for v in class.vectors.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
    }
    if clamped > 0 {
        log::warn!("clamped {clamped} negative entries to zero (dim {dim})");
    }
}

pub fn load_bank(path: &Path, format: BankFormat, opts: LoadOptions) -> Result<EmbeddingBank> {
    match format {
        BankFormat::Binary => decode_binary(&fs::read(path)?, opts),
        BankFormat::Csv => read_csv(fs::read(path)?.as_slice(), opts),
    }
}

pub fn save_bank(bank: &EmbeddingBank, path: &Path, format: BankFormat) -> Result<()> {
    // Re-check the invariants so a hand-assembled bank cannot produce a file
    // the loader would reject.
    EmbeddingBank::new(bank.dim, bank.classes.clone(), bank.provenance.clone())?;
    let bytes = match format {
        BankFormat::Binary => encode_binary(bank),
        BankFormat::Csv => write_csv(bank)?,
    };
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.flush()?;
    Ok(())
}

fn len_u32(n: usize, what: &str) -> u32 {
    u32::try_from(n).unwrap_or_else(|_| panic!("{what} {n} exceeds u32"))
}

pub fn encode_binary(bank: &EmbeddingBank) -> Vec<u8> {
    let floats: usize = bank.classes.iter().map(|c| c.vectors.len()).sum();
    let mut out = Vec::with_capacity(16 + 4 * floats + 64 * bank.classes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len_u32(bank.n_classes(), "class count").to_le_bytes());
    out.extend_from_slice(&len_u32(bank.dim, "dim").to_le_bytes());
    out.extend_from_slice(&len_u32(bank.total_vectors(), "vector count").to_le_bytes());
    for (c, class) in bank.classes.iter().enumerate() {
        out.extend_from_slice(&len_u32(class.name.len(), "name length").to_le_bytes());
        out.extend_from_slice(class.name.as_bytes());
        out.extend_from_slice(&len_u32(bank.class_len(c), "class size").to_le_bytes());
    }
    for class in &bank.classes {
        for v in &class.vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&len_u32(bank.provenance.len(), "provenance length").to_le_bytes());
    out.extend_from_slice(bank.provenance.as_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.offset;
        if n > available {
            return Err(Error::Truncated {
                offset: self.offset,
                needed: n,
                available,
            });
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let len = self.u32()?;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Utf8(what))
    }
}

pub fn decode_binary(bytes: &[u8], opts: LoadOptions) -> Result<EmbeddingBank> {
    let mut cur = Cursor { bytes, offset: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::MagicMismatch {
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let class_count = cur.u32()?;
    let dim = cur.u32()?;
    let total = cur.u32()?;
    if dim == 0 {
        return Err(Error::BankDimMismatch("header dim is zero".into()));
    }

    let mut table = Vec::with_capacity(class_count.min(1 << 16));
    for _ in 0..class_count {
        let name = cur.string("class name")?;
        let count = cur.u32()?;
        table.push((name, count));
    }
    let listed: usize = table.iter().map(|(_, n)| n).sum();
    if listed != total {
        return Err(Error::BankDimMismatch(format!(
            "header says {total} vectors, label table lists {listed}"
        )));
    }

    let mut classes = Vec::with_capacity(table.len());
    for (name, count) in table {
        let raw = cur.take(count * dim * 4)?;
        let vectors = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        classes.push(BankClass { name, vectors });
    }
    let provenance = cur.string("provenance")?;
    if cur.offset != bytes.len() {
        return Err(Error::InvalidBank(format!(
            "{} trailing bytes after provenance",
            bytes.len() - cur.offset
        )));
    }
    if opts.allow_negative {
        clamp_negatives(&mut classes, dim);
    }
    EmbeddingBank::new(dim, classes, provenance)
}

pub fn write_csv(bank: &EmbeddingBank) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((0..bank.dim).map(|i| format!("v{i}")));
    writer.write_record(&header)?;
    for (c, class) in bank.classes.iter().enumerate() {
        for k in 0..bank.class_len(c) {
            let mut record = vec![class.name.clone()];
            record.extend(bank.vector(c, k).iter().map(|v| format!("{v:.8e}")));
            writer.write_record(&record)?;
        }
    }
    writer
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn read_csv(input: &[u8], opts: LoadOptions) -> Result<EmbeddingBank> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::InvalidBank(
            "csv header must start with `label`".into(),
        ));
    }
    let dim = header.len() - 1;
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("v{i}") {
            return Err(Error::InvalidBank(format!(
                "csv header column {} is {name:?}, expected \"v{i}\"",
                i + 1
            )));
        }
    }
    let mut classes: Vec<BankClass> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::BankDimMismatch(format!(
                "row {} has {} values, header declares {dim}",
                row + 1,
                record.len().saturating_sub(1)
            )));
        }
        let label = &record[0];
        let idx = match classes.iter().position(|c| c.name == label) {
            Some(i) => i,
            None => {
                classes.push(BankClass {
                    name: label.to_string(),
                    vectors: Vec::new(),
                });
                classes.len() - 1
            }
        };
        for field in record.iter().skip(1) {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::InvalidBank(format!("row {}: cannot parse {field:?}", row + 1))
            })?;
            classes[idx].vectors.push(v);
        }
    }
    if opts.allow_negative {
        clamp_negatives(&mut classes, dim);
    }
    EmbeddingBank::new(dim, classes, String::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeStyle {
    /// Class `n` owns coordinates `[n*w, (n+1)*w)` with `w = dim / n_classes`,
    /// each set to 1.
    OnehotBlocks,
    /// Prototype entries uniform in `[0, 1)`.
    RandomNonneg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub style: PrototypeStyle,
    pub seed: u64,
}

/// Each vector is its class prototype plus `N(0, noise_sigma²)` noise per
/// coordinate, clamped at zero.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingBank> {
    if spec.n_classes == 0 || spec.per_class == 0 || spec.dim == 0 {
        return Err(Error::InvalidBank(format!(
            "classes {}, per_class {}, dim {} must all be positive",
            spec.n_classes, spec.per_class, spec.dim
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::InvalidBank(format!(
            "noise sigma {} must be nonnegative",
            spec.noise_sigma
        )));
    }
    if spec.style == PrototypeStyle::OnehotBlocks && spec.dim < spec.n_classes {
        return Err(Error::InvalidBank(format!(
            "onehot blocks need dim >= classes ({} < {})",
            spec.dim, spec.n_classes
        )));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let width = spec.dim / spec.n_classes;
    let mut classes = Vec::with_capacity(spec.n_classes);
    for n in 0..spec.n_classes {
        let prototype: Vec<f64> = match spec.style {
            PrototypeStyle::OnehotBlocks => (0..spec.dim)
                .map(|i| {
                    if i / width == n && i < width * spec.n_classes {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            PrototypeStyle::RandomNonneg => (0..spec.dim).map(|_| rng.next_f64()).collect(),
        };
        let mut vectors = Vec::with_capacity(spec.per_class * spec.dim);
        for _ in 0..spec.per_class {
            for &base in &prototype {
                let noise = if spec.noise_sigma > 0.0 {
                    spec.noise_sigma * rng.normal()
                } else {
                    0.0
                };
                vectors.push((base + noise).max(0.0) as f32);
            }
        }
        classes.push(BankClass {
            name: format!("class_{n:03}"),
            vectors,
        });
    }
    let provenance = format!(
        "synthetic style={} classes={} per_class={} dim={} sigma={} seed={}",
        match spec.style {
            PrototypeStyle::OnehotBlocks => "onehot_blocks",
            PrototypeStyle::RandomNonneg => "random_nonneg",
        },
        spec.n_classes,
        spec.per_class,
        spec.dim,
        spec.noise_sigma,
        spec.seed
    );
    EmbeddingBank::new(spec.dim, classes, provenance)
}
