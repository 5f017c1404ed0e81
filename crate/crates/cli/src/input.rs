//! Input resolution: a manifest of raw predictions or a pair of emitted
//! metric tables, presented uniformly to the commands.

use std::collections::BTreeMap;

use aol_core::data::{self, LoadedManifest, Split};
use aol_core::metrics::{self, MetricTable};

use crate::args::InputArgs;
use crate::report::{self, InputDigest};
use crate::CliError;

pub enum InputKind {
    Manifest(Box<LoadedManifest>),
    Tables { id: MetricTable, ood: MetricTable },
}

pub struct Inputs {
    pub digests: Vec<InputDigest>,
    pub kind: InputKind,
}

impl Inputs {
    pub fn load(args: &InputArgs) -> Result<Self, CliError> {
        if let Some(manifest_path) = &args.manifest {
            let digests = vec![report::digest_file(manifest_path)?];
            let loaded = data::load_manifest(manifest_path)?;
            return Ok(Inputs {
                digests,
                kind: InputKind::Manifest(Box::new(loaded)),
            });
        }
        let paths = args
            .tables
            .as_ref()
            .ok_or_else(|| CliError::Usage("either --manifest or --tables is required".into()))?;
        let digests = paths
            .iter()
            .map(|p| report::digest_file(p))
            .collect::<Result<_, _>>()?;
        let id = report::read_metric_table(&paths[0])?;
        let ood = report::read_metric_table(&paths[1])?;
        if id.split() != Split::IdVal || ood.split() != Split::Ood {
            return Err(CliError::Usage(
                "--tables expects the ID_VAL table first and the OOD table second".into(),
            ));
        }
        Ok(Inputs {
            digests,
            kind: InputKind::Tables { id, ood },
        })
    }

    /// Metric tables for both splits. From a manifest these are computed
    /// on the spot, with OOD accuracies included whenever OOD labels are
    /// present.
    pub fn tables(&self) -> Result<(MetricTable, MetricTable), CliError> {
        match &self.kind {
            InputKind::Tables { id, ood } => Ok((id.clone(), ood.clone())),
            InputKind::Manifest(loaded) => {
                let id = metrics::metric_table(
                    &loaded.set,
                    Some(&loaded.id_labels.labels),
                    Split::IdVal,
                )?;
                let ood = metrics::metric_table(
                    &loaded.set,
                    loaded.ood_labels.as_ref().map(|l| l.labels.as_slice()),
                    Split::Ood,
                )?;
                Ok((id, ood))
            }
        }
    }

    pub fn manifest(&self) -> Option<&LoadedManifest> {
        match &self.kind {
            InputKind::Manifest(loaded) => Some(loaded),
            InputKind::Tables { .. } => None,
        }
    }

    pub fn architectures(&self) -> Option<&BTreeMap<String, String>> {
        self.manifest().map(|m| &m.architectures)
    }
}
