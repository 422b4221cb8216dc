//! Dataset bundle directory: the interchange format with the converter.
//!
//! ```text
//! meta.txt            key=value lines; name, nodes, features, classes required
//! graph.edges         one `src<TAB>dst` per line
//! features.bin        "FMAT", u64 rows, u64 cols, f32 row-major (LE)
//! labels.bin          "LABL", u64 n, u32 per node (LE)
//! split_{train,val,test}.idx   one node index per line
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::sparse::{normalized_adjacency, EdgeList, SparseAdj};
use crate::train::SplitMasks;

pub const FEATURES_MAGIC: &[u8; 4] = b"FMAT";
pub const LABELS_MAGIC: &[u8; 4] = b"LABL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub name: String,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    /// Any further keys, preserved verbatim.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: Meta,
    pub features: DenseMat<f64>,
    pub edges: EdgeList,
    pub labels: Vec<usize>,
    pub masks: SplitMasks,
}

impl Dataset {
    /// Symmetrised, self-looped, normalised adjacency of the graph.
    pub fn adjacency(&self) -> Result<SparseAdj<f64>> {
        normalized_adjacency(&self.edges, true)
    }

    /// Checks every cross-file invariant.
    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if self.features.shape() != (m.nodes, m.features) {
            return Err(Error::MetaMismatch(format!(
                "features are {}x{}, meta says {}x{}",
                self.features.rows(),
                self.features.cols(),
                m.nodes,
                m.features
            )));
        }
        if self.labels.len() != m.nodes {
            return Err(Error::MetaMismatch(format!(
                "{} labels, meta says {} nodes",
                self.labels.len(),
                m.nodes
            )));
        }
        if self.edges.num_nodes != m.nodes {
            return Err(Error::MetaMismatch("edge list node count".into()));
        }
        if !self.features.is_finite() {
            return Err(Error::format("features.bin", "non-finite feature value"));
        }
        self.edges.validate()?;
        if let Some((node, &label)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l >= m.classes)
        {
            return Err(Error::LabelOutOfRange {
                node,
                label,
                classes: m.classes,
            });
        }
        self.masks.validate(m.nodes)
    }
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::MissingFile(p))
    }
}

fn parse_meta(text: &str) -> Result<Meta> {
    let mut kv = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::format("meta.txt", format!("line {}: expected key=value", n + 1))
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut take = |key: &str| {
        kv.remove(key)
            .ok_or_else(|| Error::format("meta.txt", format!("missing key {key:?}")))
    };
    let name = take("name")?;
    let mut count = |key: &str| -> Result<usize> {
        let v = take(key)?;
        v.parse()
            .map_err(|_| Error::format("meta.txt", format!("{key}={v:?} is not a count")))
    };
    let nodes = count("nodes")?;
    let features = count("features")?;
    let classes = count("classes")?;
    Ok(Meta {
        name,
        nodes,
        features,
        classes,
        extra: kv,
    })
}

fn read_u64(bytes: &[u8], at: usize, file: &str) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(file, "truncated header"))
}

fn read_features(path: &Path) -> Result<DenseMat<f64>> {
    let bytes = fs::read(path)?;
    if bytes.get(..4) != Some(FEATURES_MAGIC) {
        return Err(Error::format("features.bin", "bad magic"));
    }
    let rows = read_u64(&bytes, 4, "features.bin")? as usize;
    let cols = read_u64(&bytes, 12, "features.bin")? as usize;
    let body = &bytes[20..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("features.bin", "dimensions overflow"))?;
    if body.len() != expected {
        return Err(Error::format(
            "features.bin",
            format!("{} payload bytes for {rows}x{cols}", body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    DenseMat::from_vec(rows, cols, data)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path)?;
    if bytes.get(..4) != Some(LABELS_MAGIC) {
        return Err(Error::format("labels.bin", "bad magic"));
    }
    let n = read_u64(&bytes, 4, "labels.bin")? as usize;
    let body = &bytes[12..];
    if Some(body.len()) != n.checked_mul(4) {
        return Err(Error::format(
            "labels.bin",
            format!("{} payload bytes for {n} labels", body.len()),
        ));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect())
}

fn read_edges(path: &Path, num_nodes: usize) -> Result<EdgeList> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::format("graph.edges", format!("line {}: {line:?}", n + 1));
        let (s, d) = line.split_once('\t').ok_or_else(bad)?;
        let s = s.trim().parse().map_err(|_| bad())?;
        let d = d.trim().parse().map_err(|_| bad())?;
        edges.push((s, d));
    }
    EdgeList::new(num_nodes, edges)
}

fn read_index(path: &Path, file: &str) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::format(file, format!("line {}: {l:?}", n + 1)))
        })
        .collect()
}

/// Reads and fully validates a bundle directory.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let files = [
        "meta.txt",
        "graph.edges",
        "features.bin",
        "labels.bin",
        "split_train.idx",
        "split_val.idx",
        "split_test.idx",
    ];
    let paths: Vec<PathBuf> = files
        .iter()
        .map(|f| require(dir, f))
        .collect::<Result<_>>()?;
    let meta = parse_meta(&fs::read_to_string(&paths[0])?)?;
    let features = read_features(&paths[2])?;
    let labels = read_labels(&paths[3])?;
    // Check shapes before edges so a wrong node count is reported as such.
    if features.rows() != meta.nodes
        || labels.len() != meta.nodes
        || features.cols() != meta.features
    {
        return Err(Error::MetaMismatch(format!(
            "meta says {} nodes x {} features; features.bin is {}x{}, labels.bin has {}",
            meta.nodes,
            meta.features,
            features.rows(),
            features.cols(),
            labels.len()
        )));
    }
    let edges = read_edges(&paths[1], meta.nodes)?;
    let masks = SplitMasks {
        train: read_index(&paths[4], files[4])?,
        val: read_index(&paths[5], files[5])?,
        test: read_index(&paths[6], files[6])?,
    };
    let ds = Dataset {
        meta,
        features,
        edges,
        labels,
        masks,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes `ds` in bundle layout. Features are stored as `f32`.
pub fn write_bundle(dir: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    ds.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let m = &ds.meta;
    let mut meta = format!(
        "name={}\nnodes={}\nfeatures={}\nclasses={}\n",
        m.name, m.nodes, m.features, m.classes
    );
    for (k, v) in &m.extra {
        meta.push_str(&format!("{k}={v}\n"));
    }
    fs::write(dir.join("meta.txt"), meta)?;

    let edges: String = ds
        .edges
        .edges
        .iter()
        .map(|(s, d)| format!("{s}\t{d}\n"))
        .collect();
    fs::write(dir.join("graph.edges"), edges)?;

    let mut fbytes = Vec::with_capacity(20 + ds.features.len() * 4);
    fbytes.extend_from_slice(FEATURES_MAGIC);
    fbytes.extend_from_slice(&(ds.features.rows() as u64).to_le_bytes());
    fbytes.extend_from_slice(&(ds.features.cols() as u64).to_le_bytes());
    for &v in ds.features.as_slice() {
        fbytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(dir.join("features.bin"), fbytes)?;

    let mut lbytes = Vec::with_capacity(12 + ds.labels.len() * 4);
    lbytes.extend_from_slice(LABELS_MAGIC);
    lbytes.extend_from_slice(&(ds.labels.len() as u64).to_le_bytes());
    for &l in &ds.labels {
        let l = u32::try_from(l).map_err(|_| Error::format("labels.bin", "label exceeds u32"))?;
        lbytes.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(dir.join("labels.bin"), lbytes)?;

    for (name, idx) in [
        ("train", &ds.masks.train),
        ("val", &ds.masks.val),
        ("test", &ds.masks.test),
    ] {
        let text: String = idx.iter().map(|i| format!("{i}\n")).collect();
        fs::write(dir.join(format!("split_{name}.idx")), text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_parsing() {
        let m = parse_meta("name=toy\nnodes=4\n\nfeatures=3\nclasses=2\nsource=hand\n").unwrap();
        assert_eq!((m.nodes, m.features, m.classes), (4, 3, 2));
        assert_eq!(m.extra.get("source").map(String::as_str), Some("hand"));
        assert!(parse_meta("name=toy\nnodes=4\n").is_err());
        assert!(parse_meta("name=toy\nnodes=x\nfeatures=1\nclasses=1").is_err());
    }
}
