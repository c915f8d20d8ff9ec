use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::langtree::LanguageTree;

/// Parameter-sharing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Layers shared along the language family tree.
    Hnmt,
    /// One encoder and decoder per task (bilingual baseline).
    ManyToMany,
    /// One shared encoder, one decoder per target language.
    OneToMany,
    /// One encoder per source language, one shared decoder.
    ManyToOne,
    /// A single shared encoder and decoder.
    OneToOne,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::ManyToMany,
        Scheme::OneToMany,
        Scheme::ManyToOne,
        Scheme::OneToOne,
        Scheme::Hnmt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Hnmt => "hnmt",
            Scheme::ManyToMany => "many-to-many",
            Scheme::OneToMany => "one-to-many",
            Scheme::ManyToOne => "many-to-one",
            Scheme::OneToOne => "one-to-one",
        }
    }

    /// Schemes with a single decoder need the target language spelled out
    /// in the input.
    pub fn needs_target_token(self) -> bool {
        matches!(self, Scheme::ManyToOne | Scheme::OneToOne)
    }

    fn tag(self) -> &'static str {
        match self {
            Scheme::Hnmt => "hnmt",
            Scheme::ManyToMany => "m2m",
            Scheme::OneToMany => "o2m",
            Scheme::ManyToOne => "m2o",
            Scheme::OneToOne => "o2o",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| ModelError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Encoder,
    Decoder,
}

impl Side {
    fn tag(self) -> &'static str {
        match self {
            Side::Encoder => "enc",
            Side::Decoder => "dec",
        }
    }
}

/// Identity of one LSTM layer. Two routes share a layer exactly when they
/// contain equal keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerKey {
    pub side: Side,
    /// Tree node id (HNMT) or a scheme-specific owner id.
    pub node_id: String,
    /// Position in the stack, 1-based, in data-flow order.
    pub depth: usize,
}

impl fmt::Display for LayerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.side.tag(), self.depth, self.node_id)
    }
}

/// The layers one (source, target) task runs through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub source: String,
    pub target: String,
    pub scheme: Scheme,
    pub encoder_layers: Vec<LayerKey>,
    pub decoder_layers: Vec<LayerKey>,
    pub needs_target_token: bool,
    /// Owner of the source embedding table.
    pub source_owner: String,
    /// Owner of the target embedding table and output projection.
    pub target_owner: String,
}

impl RoutePlan {
    pub fn layers(&self) -> impl Iterator<Item = &LayerKey> {
        self.encoder_layers.iter().chain(&self.decoder_layers)
    }

    pub fn task_label(&self) -> String {
        task_label(&self.source, &self.target)
    }
}

pub fn task_label(src: &str, tgt: &str) -> String {
    format!("{src}-{tgt}")
}

/// Builds the route of `src → tgt` under `scheme` for an `layers`-deep
/// encoder and decoder. For [`Scheme::Hnmt`] the tree must already be
/// preprocessed to exactly `layers - 2` families per language.
pub fn compile_route(
    tree: &LanguageTree,
    src: &str,
    tgt: &str,
    scheme: Scheme,
    layers: usize,
) -> Result<RoutePlan, ModelError> {
    if layers == 0 {
        return Err(ModelError::InvalidLayers(layers));
    }
    let src_entry = tree.entry(src)?;
    let tgt_entry = tree.entry(tgt)?;
    let key = |side, node_id: String, depth| LayerKey { side, node_id, depth };
    let stack = |side: Side, owner: &str| -> Vec<LayerKey> {
        (1..=layers)
            .map(|d| key(side, format!("{}:{owner}", scheme.tag()), d))
            .collect()
    };
    let task = task_label(src, tgt);
    let (encoder_layers, decoder_layers, source_owner, target_owner) = match scheme {
        Scheme::Hnmt => {
            if layers < 3 {
                return Err(ModelError::InvalidLayers(layers));
            }
            let want = layers - 2;
            for (lang, entry) in [(src, src_entry), (tgt, tgt_entry)] {
                if entry.chain.len() != want {
                    return Err(ModelError::PreprocessingMismatch {
                        language: lang.to_string(),
                        families: entry.chain.len(),
                        expected: want,
                    });
                }
            }
            let world = tree.root().id.clone();
            let mut enc_nodes = vec![src_entry.leaf_id.clone()];
            enc_nodes.extend(src_entry.chain.iter().rev().cloned());
            enc_nodes.push(world.clone());
            let mut dec_nodes = vec![world];
            dec_nodes.extend(tgt_entry.chain.iter().cloned());
            dec_nodes.push(tgt_entry.leaf_id.clone());
            let enc = enc_nodes
                .into_iter()
                .enumerate()
                .map(|(i, n)| key(Side::Encoder, n, i + 1))
                .collect();
            let dec = dec_nodes
                .into_iter()
                .enumerate()
                .map(|(i, n)| key(Side::Decoder, n, i + 1))
                .collect();
            (enc, dec, src.to_string(), tgt.to_string())
        }
        Scheme::ManyToMany => (
            stack(Side::Encoder, &task),
            stack(Side::Decoder, &task),
            task.clone(),
            task.clone(),
        ),
        Scheme::OneToMany => (
            stack(Side::Encoder, "shared"),
            stack(Side::Decoder, tgt),
            src.to_string(),
            tgt.to_string(),
        ),
        Scheme::ManyToOne => (
            stack(Side::Encoder, src),
            stack(Side::Decoder, "shared"),
            src.to_string(),
            tgt.to_string(),
        ),
        Scheme::OneToOne => (
            stack(Side::Encoder, "shared"),
            stack(Side::Decoder, "shared"),
            src.to_string(),
            tgt.to_string(),
        ),
    };
    Ok(RoutePlan {
        source: src.to_string(),
        target: tgt.to_string(),
        scheme,
        encoder_layers,
        decoder_layers,
        needs_target_token: scheme.needs_target_token(),
        source_owner,
        target_owner,
    })
}

/// One task's entry in a sharing manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestTask {
    pub source: String,
    pub target: String,
    pub needs_target_token: bool,
    pub encoder: Vec<String>,
    pub decoder: Vec<String>,
}

/// JSON report of every task's layer keys under one scheme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteManifest {
    pub scheme: Scheme,
    pub layers: usize,
    pub tasks: Vec<ManifestTask>,
}

impl RouteManifest {
    pub fn new(scheme: Scheme, layers: usize, routes: &[RoutePlan]) -> Self {
        let names = |ks: &[LayerKey]| ks.iter().map(|k| k.node_id.clone()).collect();
        RouteManifest {
            scheme,
            layers,
            tasks: routes
                .iter()
                .map(|r| ManifestTask {
                    source: r.source.clone(),
                    target: r.target.clone(),
                    needs_target_token: r.needs_target_token,
                    encoder: names(&r.encoder_layers),
                    decoder: names(&r.decoder_layers),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langtree::{preprocess, sample_tree};

    fn ids(keys: &[LayerKey]) -> Vec<&str> {
        keys.iter().map(|k| k.node_id.as_str()).collect()
    }

    #[test]
    fn spanish_to_english() {
        let tree = preprocess(&sample_tree(), 4).unwrap();
        let r = compile_route(&tree, "es", "en", Scheme::Hnmt, 4).unwrap();
        assert_eq!(
            ids(&r.encoder_layers),
            [
                "world/indo-european/italic/es",
                "world/indo-european/italic",
                "world/indo-european",
                "world"
            ]
        );
        assert_eq!(
            ids(&r.decoder_layers),
            [
                "world",
                "world/indo-european",
                "world/indo-european/germanic",
                "world/indo-european/germanic/en"
            ]
        );
        assert!(!r.needs_target_token);
        assert_eq!(r.decoder_layers[0].depth, 1);
        assert_eq!(r.encoder_layers[3].depth, 4);
    }

    #[test]
    fn spanish_to_finnish_uses_duplicates() {
        let tree = preprocess(&sample_tree(), 4).unwrap();
        let r = compile_route(&tree, "es", "fi", Scheme::Hnmt, 4).unwrap();
        assert_eq!(
            ids(&r.decoder_layers),
            [
                "world",
                "world/uralic",
                "world/uralic/uralic@fi#1",
                "world/uralic/uralic@fi#1/fi"
            ]
        );
    }

    #[test]
    fn hnmt_requires_preprocessed_tree() {
        let err = compile_route(&sample_tree(), "es", "fi", Scheme::Hnmt, 4).unwrap_err();
        assert!(matches!(err, ModelError::PreprocessingMismatch { .. }));
        let tree = preprocess(&sample_tree(), 4).unwrap();
        assert!(matches!(
            compile_route(&tree, "es", "xx", Scheme::Hnmt, 4),
            Err(ModelError::Tree(_))
        ));
        assert!(compile_route(&tree, "es", "en", Scheme::Hnmt, 5).is_err());
    }

    #[test]
    fn one_to_one_is_universal() {
        let tree = sample_tree();
        let a = compile_route(&tree, "es", "en", Scheme::OneToOne, 4).unwrap();
        let b = compile_route(&tree, "fi", "de", Scheme::OneToOne, 4).unwrap();
        assert_eq!(a.encoder_layers, b.encoder_layers);
        assert_eq!(a.decoder_layers, b.decoder_layers);
        assert!(a.needs_target_token);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("bilingual".parse::<Scheme>().is_err());
    }
}
