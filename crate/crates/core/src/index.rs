//! Containment search over a corpus of embedded targets.
//!
//! File layout: the magic `MASIDX1\0`, a little-endian `u64` header length,
//! the JSON header, then `count × m` little-endian `f64` values.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masnet::MasNet;
use crate::multiset::{is_subset_real, RealMultiset};

pub const MAGIC: &[u8; 8] = b"MASIDX1\0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub version: u32,
    /// Checkpoint hash of the model that produced every embedding.
    pub model_ref: String,
    pub m: usize,
    pub d: usize,
    pub delta_eval: f64,
    /// Caller-supplied build time, seconds since the epoch.
    pub built_at: u64,
    pub ids: Vec<String>,
    /// Raw targets, kept when exact re-verification is wanted.
    pub targets: Option<Vec<RealMultiset>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Index {
    pub header: IndexHeader,
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hit {
    pub id: String,
    /// `min_i (F(T)_i - F(S)_i)`.
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    pub store_targets: bool,
    pub delta_eval: f64,
    pub built_at: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            store_targets: true,
            delta_eval: 0.0,
            built_at: 0,
        }
    }
}

pub fn build_index(model: &MasNet, corpus: &[(String, RealMultiset)], opts: BuildOptions) -> Result<Index> {
    let mut seen = HashSet::new();
    for (id, t) in corpus {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
        if t.dim() != model.d() {
            return Err(Error::DimMismatch {
                expected: model.d(),
                found: t.dim(),
            });
        }
    }
    let embeddings = corpus
        .par_iter()
        .map(|(_, t)| model.forward(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Index {
        header: IndexHeader {
            version: 1,
            model_ref: model.checkpoint_hash(),
            m: model.out_dim(),
            d: model.d(),
            delta_eval: opts.delta_eval,
            built_at: opts.built_at,
            ids: corpus.iter().map(|(id, _)| id.clone()).collect(),
            targets: opts.store_targets.then(|| corpus.iter().map(|(_, t)| t.clone()).collect()),
        },
        embeddings,
    })
}

impl Index {
    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn check_model(&self, model: &MasNet) -> Result<()> {
        let found = model.checkpoint_hash();
        if found != self.header.model_ref {
            return Err(Error::CheckpointMismatch {
                expected: self.header.model_ref.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Ids with `F(S) ≤ F(T) + δ` in every coordinate, by margin descending
    /// then id. With `verify`, hits that fail `is_subset_real(S, T, tol)` are
    /// dropped; this needs stored targets.
    pub fn query_embedding(&self, s: &RealMultiset, fs: &[f64], delta_eval: f64, verify: Option<f64>) -> Result<Vec<Hit>> {
        if s.dim() != self.header.d {
            return Err(Error::DimMismatch {
                expected: self.header.d,
                found: s.dim(),
            });
        }
        if fs.len() != self.header.m {
            return Err(Error::DimMismatch {
                expected: self.header.m,
                found: fs.len(),
            });
        }
        let targets = match (verify, &self.header.targets) {
            (Some(_), None) => return Err(Error::Precondition("verification needs an index built with stored targets".into())),
            (_, t) => t.as_deref(),
        };
        let mut hits = Vec::new();
        for (i, e) in self.embeddings.iter().enumerate() {
            if fs.iter().zip(e).any(|(a, b)| *a > b + delta_eval) {
                continue;
            }
            if let (Some(tol), Some(ts)) = (verify, targets) {
                if !is_subset_real(s, &ts[i], tol)? {
                    continue;
                }
            }
            let margin = e.iter().zip(fs).map(|(b, a)| b - a).fold(f64::INFINITY, f64::min);
            hits.push(Hit {
                id: self.header.ids[i].clone(),
                margin,
            });
        }
        hits.sort_by(|a, b| b.margin.total_cmp(&a.margin).then_with(|| a.id.cmp(&b.id)));
        Ok(hits)
    }

    /// Embeds `s` with `model` (which must be the indexing checkpoint) and queries.
    pub fn query(&self, model: &MasNet, s: &RealMultiset, delta_eval: f64, verify: Option<f64>) -> Result<Vec<Hit>> {
        self.check_model(model)?;
        self.query_embedding(s, &model.forward(s)?, delta_eval, verify)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in self.embeddings.iter().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not an index file (bad magic)".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| Error::Format("header too large".into()))?;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header: IndexHeader = serde_json::from_slice(&header)?;
        if header.version != 1 {
            return Err(Error::Format(format!("unsupported index version {}", header.version)));
        }
        if header.targets.as_ref().is_some_and(|t| t.len() != header.ids.len()) {
            return Err(Error::Format("stored targets do not match ids".into()));
        }
        let mut block = Vec::new();
        r.read_to_end(&mut block)?;
        if block.len() != header.ids.len() * header.m * 8 {
            return Err(Error::Format(format!(
                "embedding block has {} bytes, expected {}",
                block.len(),
                header.ids.len() * header.m * 8
            )));
        }
        let values: Vec<f64> = block
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let embeddings = if header.m == 0 {
            vec![Vec::new(); header.ids.len()]
        } else {
            values.chunks(header.m).map(<[f64]>::to_vec).collect()
        };
        Ok(Self { header, embeddings })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Loads and checks that `model` is the checkpoint the index was built with.
    pub fn load_for(path: &Path, model: &MasNet) -> Result<Self> {
        let idx = Self::load(path)?;
        idx.check_model(model)?;
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masnet::{Architecture, Variant};
    use rand::Rng;

    fn corpus(n: usize, seed: u64) -> Vec<(String, RealMultiset)> {
        let mut rng = crate::seed::rng_from_seed(seed);
        (0..n)
            .map(|i| {
                let pts = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                (format!("t{i:03}"), RealMultiset::new(3, pts).unwrap())
            })
            .collect()
    }

    fn model(m: usize) -> MasNet {
        MasNet::new(Architecture::new(3, m, Variant::HatMas).with_hidden(vec![8]), 3).unwrap()
    }

    #[test]
    fn empty_corpus_gives_empty_index() {
        let idx = build_index(&model(4), &[], BuildOptions::default()).unwrap();
        assert!(idx.is_empty());
        assert!(idx.query(&model(4), &RealMultiset::empty(3).unwrap(), 0.0, None).unwrap().is_empty());
    }

    #[test]
    fn build_rejects_duplicates_and_mixed_dims() {
        let mut c = corpus(3, 1);
        c.push(c[0].clone());
        assert!(matches!(build_index(&model(4), &c, BuildOptions::default()), Err(Error::DuplicateId(_))));
        let mut c = corpus(3, 1);
        c.push(("x".into(), RealMultiset::scalars(&[1.0])));
        assert!(matches!(build_index(&model(4), &c, BuildOptions::default()), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn embeddings_are_reproducible() {
        let net = model(6);
        let c = corpus(100, 2);
        let idx = build_index(&net, &c, BuildOptions::default()).unwrap();
        for ((_, t), e) in c.iter().zip(&idx.embeddings) {
            assert_eq!(&net.forward(t).unwrap(), e);
        }
    }

    #[test]
    fn stored_targets_and_their_subsets_are_found() {
        let net = model(6);
        let c = corpus(50, 3);
        let idx = build_index(&net, &c, BuildOptions::default()).unwrap();
        for (id, t) in &c {
            let hits = idx.query(&net, t, 0.0, Some(0.0)).unwrap();
            assert!(hits.iter().any(|h| &h.id == id));
            let sub = RealMultiset::new(3, t.points()[1..3].to_vec()).unwrap();
            assert!(idx.query(&net, &sub, 0.0, None).unwrap().iter().any(|h| &h.id == id));
        }
    }

    #[test]
    fn results_ignore_insertion_order() {
        let net = model(4);
        let c = corpus(40, 4);
        let mut r = c.clone();
        r.reverse();
        let a = build_index(&net, &c, BuildOptions::default()).unwrap();
        let b = build_index(&net, &r, BuildOptions::default()).unwrap();
        let s = RealMultiset::new(3, vec![vec![0.1, 0.2, 0.3]]).unwrap();
        assert_eq!(a.query(&net, &s, 0.5, None).unwrap(), b.query(&net, &s, 0.5, None).unwrap());
    }

    #[test]
    fn save_load_round_trip() {
        let net = model(4);
        let idx = build_index(&net, &corpus(30, 5), BuildOptions { built_at: 17, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        idx.save(&path).unwrap();
        let back = Index::load_for(&path, &net).unwrap();
        assert_eq!(back, idx);
        let s = RealMultiset::new(3, vec![vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(back.query(&net, &s, 0.1, Some(0.0)).unwrap(), idx.query(&net, &s, 0.1, Some(0.0)).unwrap());
        assert!(matches!(Index::load_for(&path, &model(5)), Err(Error::CheckpointMismatch { .. })));
        std::fs::write(&path, b"garbage!........").unwrap();
        assert!(matches!(Index::load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn verify_requires_stored_targets() {
        let net = model(4);
        let opts = BuildOptions { store_targets: false, ..Default::default() };
        let idx = build_index(&net, &corpus(3, 6), opts).unwrap();
        let s = RealMultiset::new(3, vec![vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(idx.query(&net, &s, 0.0, Some(0.0)).is_err());
    }
}
