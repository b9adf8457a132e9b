//! Weight files for the story model and the initializer.
//!
//! Besides the learned tensors a file carries `meta.*` tensors: the model
//! shape, the condition standardizer, the geometry provider and a hash of
//! the vocabulary text so weights cannot be paired with the wrong vocabulary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::features::Standardizer;
use crate::geometry::ProviderKind;
use crate::io::Vocabulary;
use crate::model::{FragmentInitializer, Matrix, ModelConfig, ParamStore, StoryModel, VocabDims, WeightsError};
use crate::molgraph::stable_hash;

fn vocab_hash(vocab: &Vocabulary) -> Matrix {
    let words: Vec<u64> = vocab.to_text().bytes().map(u64::from).collect();
    let h = stable_hash(&words);
    // two exact 32-bit halves
    Matrix::row_vector(vec![(h >> 32) as f64, (h & 0xffff_ffff) as f64])
}

fn provider_code(p: ProviderKind) -> f64 {
    match p {
        ProviderKind::Topological => 0.0,
        ProviderKind::ForceRelaxed => 1.0,
        ProviderKind::None => 2.0,
    }
}

fn provider_from(code: f64) -> Result<ProviderKind, WeightsError> {
    match code as i64 {
        0 => Ok(ProviderKind::Topological),
        1 => Ok(ProviderKind::ForceRelaxed),
        2 => Ok(ProviderKind::None),
        _ => Err(WeightsError::Malformed(format!("provider code {code}"))),
    }
}

fn standardizer_tensor(s: &Standardizer) -> Matrix {
    let mut d = s.mean.to_vec();
    d.extend_from_slice(&s.std);
    Matrix::from_vec(2, 3, d)
}

fn meta<'a>(store: &'a ParamStore, name: &str, shape: (usize, usize)) -> Result<&'a Matrix, WeightsError> {
    let i = store.index(name).ok_or_else(|| WeightsError::Missing(name.into()))?;
    let m = store.get(i);
    if m.shape() != shape {
        return Err(WeightsError::Shape {
            name: name.into(),
            found: m.shape(),
            expected: shape,
        });
    }
    Ok(m)
}

fn check_vocab(store: &ParamStore, vocab: &Vocabulary) -> Result<(), WeightsError> {
    if meta(store, "meta.vocab", (1, 2))? != &vocab_hash(vocab) {
        return Err(WeightsError::Malformed("weights were trained with a different vocabulary".into()));
    }
    Ok(())
}

fn read_standardizer(store: &ParamStore) -> Result<Standardizer, WeightsError> {
    let s = meta(store, "meta.standardizer", (2, 3))?;
    Ok(Standardizer {
        mean: [s.data[0], s.data[1], s.data[2]],
        std: [s.data[3], s.data[4], s.data[5]],
    })
}

fn without_meta(store: &ParamStore) -> ParamStore {
    let mut out = ParamStore::new();
    for i in 0..store.len() {
        if !store.name(i).starts_with("meta.") {
            out.add(store.name(i), store.get(i).clone());
        }
    }
    out
}

fn write_store(path: &Path, store: &ParamStore) -> Result<(), WeightsError> {
    let mut w = BufWriter::new(File::create(path)?);
    store.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_store(path: &Path) -> Result<ParamStore, WeightsError> {
    ParamStore::read_from(&mut BufReader::new(File::open(path)?))
}

/// A trained story model with everything needed to run it.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: StoryModel,
    pub standardizer: Standardizer,
    pub provider: ProviderKind,
}

impl ModelBundle {
    pub fn to_store(&self, vocab: &Vocabulary) -> ParamStore {
        let c = &self.model.cfg;
        let d = &self.model.dims;
        let mut s = ParamStore::new();
        s.add(
            "meta.model",
            Matrix::row_vector(vec![
                c.frag_dim as f64,
                c.attach_dim as f64,
                c.heads as f64,
                c.layers as f64,
                c.hidden as f64,
                c.dropout,
                c.geometry_init,
                c.freeze_geometry as u8 as f64,
                c.geometry as u8 as f64,
                provider_code(self.provider),
            ]),
        );
        s.add(
            "meta.dims",
            Matrix::row_vector(vec![d.fragments as f64, d.attach_types as f64, d.outputs as f64]),
        );
        s.add("meta.standardizer", standardizer_tensor(&self.standardizer));
        s.add("meta.vocab", vocab_hash(vocab));
        for i in 0..self.model.store.len() {
            s.add(self.model.store.name(i), self.model.store.get(i).clone());
        }
        s
    }

    pub fn from_store(store: &ParamStore, vocab: &Vocabulary) -> Result<ModelBundle, WeightsError> {
        check_vocab(store, vocab)?;
        let m = &meta(store, "meta.model", (1, 10))?.data;
        let d = &meta(store, "meta.dims", (1, 3))?.data;
        let cfg = ModelConfig {
            frag_dim: m[0] as usize,
            attach_dim: m[1] as usize,
            heads: m[2] as usize,
            layers: m[3] as usize,
            hidden: m[4] as usize,
            dropout: m[5],
            geometry_init: m[6],
            freeze_geometry: m[7] != 0.0,
            geometry: m[8] != 0.0,
        };
        if cfg.heads == 0 || cfg.layers == 0 || cfg.frag_dim % cfg.heads != 0 {
            return Err(WeightsError::Malformed("inconsistent model shape".into()));
        }
        let dims = VocabDims {
            fragments: d[0] as usize,
            attach_types: d[1] as usize,
            outputs: d[2] as usize,
        };
        Ok(ModelBundle {
            model: StoryModel::from_store(cfg, dims, without_meta(store))?,
            standardizer: read_standardizer(store)?,
            provider: provider_from(m[9])?,
        })
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<(), WeightsError> {
        write_store(path, &self.to_store(vocab))
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<ModelBundle, WeightsError> {
        ModelBundle::from_store(&read_store(path)?, vocab)
    }
}

#[derive(Debug, Clone)]
pub struct InitializerBundle {
    pub init: FragmentInitializer,
    pub standardizer: Standardizer,
}

impl InitializerBundle {
    pub fn to_store(&self, vocab: &Vocabulary) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("meta.standardizer", standardizer_tensor(&self.standardizer));
        s.add("meta.vocab", vocab_hash(vocab));
        for i in 0..self.init.store.len() {
            s.add(self.init.store.name(i), self.init.store.get(i).clone());
        }
        s
    }

    pub fn from_store(store: &ParamStore, vocab: &Vocabulary) -> Result<InitializerBundle, WeightsError> {
        check_vocab(store, vocab)?;
        Ok(InitializerBundle {
            init: FragmentInitializer::from_store(without_meta(store))?,
            standardizer: read_standardizer(store)?,
        })
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<(), WeightsError> {
        write_store(path, &self.to_store(vocab))
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<InitializerBundle, WeightsError> {
        InitializerBundle::from_store(&read_store(path)?, vocab)
    }
}
