use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use super::synthetic::{
    SyntheticFeatures, SyntheticIdentifier, SyntheticPromoter, SyntheticProposer,
    SyntheticTextEncoder, SYNTHETIC_ID,
};
use super::{FeatureExtractor, Identifier, MaskPromoter, MaskProposer, TextEncoder};
use crate::error::{Error, Result};
use crate::model::{BackendBinding, Params};

/// Environment variable adapters read to locate model weights.
pub const WEIGHTS_DIR_ENV: &str = "OVCD_WEIGHTS_DIR";

/// Run-wide inputs available to backend constructors.
#[derive(Debug, Clone, Default)]
pub struct BackendContext {
    pub seed: u64,
    pub weights_dir: Option<PathBuf>,
}

impl BackendContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            weights_dir: None,
        }
    }

    /// Context with `weights_dir` taken from [`WEIGHTS_DIR_ENV`].
    pub fn from_env(seed: u64) -> Self {
        Self {
            seed,
            weights_dir: std::env::var_os(WEIGHTS_DIR_ENV).map(PathBuf::from),
        }
    }
}

type Ctor<T> = Arc<dyn Fn(&Params, &BackendContext) -> Result<Arc<T>> + Send + Sync>;

/// Backend constructors keyed by string id, one table per component kind.
#[derive(Clone)]
pub struct Registry {
    proposers: BTreeMap<String, Ctor<dyn MaskProposer>>,
    feature_extractors: BTreeMap<String, Ctor<dyn FeatureExtractor>>,
    text_encoders: BTreeMap<String, Ctor<dyn TextEncoder>>,
    identifiers: BTreeMap<String, Ctor<dyn Identifier>>,
    promoters: BTreeMap<String, Ctor<dyn MaskPromoter>>,
}

macro_rules! kind_methods {
    ($field:ident, $register:ident, $build:ident, $trait:ident, $kind:literal) => {
        pub fn $register<F>(&mut self, id: impl Into<String>, ctor: F)
        where
            F: Fn(&Params, &BackendContext) -> Result<Arc<dyn $trait>> + Send + Sync + 'static,
        {
            self.$field.insert(id.into(), Arc::new(ctor));
        }

        pub fn $build(
            &self,
            binding: &BackendBinding,
            ctx: &BackendContext,
        ) -> Result<Arc<dyn $trait>> {
            let ctor = self
                .$field
                .get(&binding.backend)
                .ok_or_else(|| Error::UnknownBackend {
                    kind: $kind,
                    id: binding.backend.clone(),
                })?;
            ctor(&binding.params, ctx)
        }
    };
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            proposers: BTreeMap::new(),
            feature_extractors: BTreeMap::new(),
            text_encoders: BTreeMap::new(),
            identifiers: BTreeMap::new(),
            promoters: BTreeMap::new(),
        }
    }

    /// Registry holding the synthetic reference backends.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register_proposer(SYNTHETIC_ID, |p, _| {
            Ok(Arc::new(SyntheticProposer::from_params(p)?))
        });
        r.register_feature_extractor(SYNTHETIC_ID, |p, ctx| {
            Ok(Arc::new(SyntheticFeatures::from_params(p, ctx.seed)?))
        });
        r.register_text_encoder(SYNTHETIC_ID, |p, ctx| {
            Ok(Arc::new(SyntheticTextEncoder::from_params(p, ctx.seed)?))
        });
        r.register_identifier(SYNTHETIC_ID, |p, _| {
            Ok(Arc::new(SyntheticIdentifier::from_params(p)?))
        });
        r.register_promoter(SYNTHETIC_ID, |p, _| {
            Ok(Arc::new(SyntheticPromoter::from_params(p)?))
        });
        r
    }

    kind_methods!(
        proposers,
        register_proposer,
        build_proposer,
        MaskProposer,
        "mask proposer"
    );
    kind_methods!(
        feature_extractors,
        register_feature_extractor,
        build_feature_extractor,
        FeatureExtractor,
        "feature extractor"
    );
    kind_methods!(
        text_encoders,
        register_text_encoder,
        build_text_encoder,
        TextEncoder,
        "text encoder"
    );
    kind_methods!(
        identifiers,
        register_identifier,
        build_identifier,
        Identifier,
        "identifier"
    );
    kind_methods!(
        promoters,
        register_promoter,
        build_promoter,
        MaskPromoter,
        "mask promoter"
    );

    /// `(component kind, backend id)` for every registered backend.
    pub fn list(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        out.extend(self.proposers.keys().map(|k| ("proposer", k.clone())));
        out.extend(
            self.feature_extractors
                .keys()
                .map(|k| ("features", k.clone())),
        );
        out.extend(
            self.text_encoders
                .keys()
                .map(|k| ("text_encoder", k.clone())),
        );
        out.extend(self.identifiers.keys().map(|k| ("identifier", k.clone())));
        out.extend(self.promoters.keys().map(|k| ("promoter", k.clone())));
        out
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_builtin()
    }
}
