use std::path::Path;

use crate::data::{synth_blobs, Dataset, LabeledSample, Split};
use crate::error::{Error, Result};
use crate::network::{save, Network};
use crate::scalar::Scalar;
use crate::train::{train_fixture, TrainConfig};

/// Recipe for one seeded synthetic model.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub name: String,
    pub hidden: Vec<usize>,
    pub input_dim: usize,
    pub classes: usize,
    /// Total samples, split 60/20/20 into train, validation and test.
    pub samples: usize,
    pub data_seed: u64,
    pub train_seed: u64,
    pub epochs: usize,
}

impl FixtureSpec {
    pub fn new(name: &str, hidden: Vec<usize>, input_dim: usize, classes: usize, data_seed: u64) -> Self {
        Self {
            name: name.to_string(),
            hidden,
            input_dim,
            classes,
            samples: 1000,
            data_seed,
            train_seed: 3,
            epochs: 40,
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<Fixture<T>> {
        let data = synth_blobs::<T>(self.samples, self.input_dim, self.classes, self.data_seed)?;
        let cfg = TrainConfig::new(self.hidden.clone(), self.epochs, self.train_seed);
        let network = train_fixture(&data.split(Split::Train), self.classes, &cfg)?;
        Ok(Fixture {
            spec: self.clone(),
            data,
            network,
        })
    }
}

/// The standard fixture set, from 2x8 up to 4x32.
pub fn standard_fixtures() -> Vec<FixtureSpec> {
    vec![
        FixtureSpec::new("blobs-2x8-a", vec![8, 8], 2, 2, 11),
        FixtureSpec::new("blobs-2x8-b", vec![8, 8], 3, 3, 12),
        FixtureSpec::new("blobs-2x20", vec![20, 20], 4, 3, 13),
        FixtureSpec::new("blobs-3x16", vec![16, 16, 16], 4, 4, 14),
        FixtureSpec::new("blobs-4x32", vec![32, 32, 32, 32], 4, 3, 11),
    ]
}

/// Looks a standard fixture up by name.
pub fn fixture_spec(name: &str) -> Result<FixtureSpec> {
    standard_fixtures()
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::Config(format!("unknown fixture `{name}`")))
}

#[derive(Debug, Clone)]
pub struct Fixture<T: Scalar = f64> {
    pub spec: FixtureSpec,
    pub data: Dataset<T>,
    pub network: Network<T>,
}

impl<T: Scalar> Fixture<T> {
    pub fn validation(&self) -> Vec<LabeledSample<T>> {
        self.data.split(Split::Validation)
    }

    pub fn test(&self) -> Vec<LabeledSample<T>> {
        self.data.split(Split::Test)
    }

    /// Writes `<name>.model`, `<name>-val.csv` and `<name>-test.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = &self.spec.name;
        save(&self.network, dir.join(format!("{name}.model")))?;
        self.data.write_csv(dir.join(format!("{name}-val.csv")), Some(Split::Validation))?;
        self.data.write_csv(dir.join(format!("{name}-test.csv")), Some(Split::Test))?;
        Ok(())
    }
}
