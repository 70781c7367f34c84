//! The class-incremental protocol: sessions of `g` classes arrive in a
//! permutation order, strategies update a single-headed model, and
//! evaluation always covers every class seen so far with no task identity.
//!
//! Strategies other than the joint-training oracle never receive labeled
//! data from earlier sessions; the runner hands them only the current
//! session's data (plus the exemplar store, for the exemplar variant).

mod exemplar;

pub use exemplar::ExemplarStore;

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{AuxiliaryPool, LabeledDataset};
use crate::distill::{consolidate, ConsolidationConfig};
use crate::error::{Error, Result};
use crate::metrics::{confusion_matrix, top1_accuracy, MetricsRecord};
use crate::nn::{
    init_model, train_supervised, train_supervised_masked, MlpSpec, Model, TrainConfig,
};
use crate::rng::derive_seed;
use crate::tensor::Matrix;

/// Per-class labeled splits with read accounting on the train side, so
/// tests can prove which strategies touched which data.
pub struct ClassStream {
    per_class: BTreeMap<u32, ClassData>,
    dim: usize,
}

struct ClassData {
    train: LabeledDataset,
    test: LabeledDataset,
    train_reads: Cell<u64>,
}

impl ClassStream {
    pub fn from_splits(train: &LabeledDataset, test: &LabeledDataset) -> Result<Self> {
        if train.dim() != test.dim() {
            return Err(Error::shape("train/test dimensionality mismatch"));
        }
        let classes = train.classes();
        if classes != test.classes() {
            return Err(Error::config(
                "every class in the train split must appear in the test split",
            ));
        }
        let mut per_class = BTreeMap::new();
        for &c in &classes {
            per_class.insert(
                c,
                ClassData {
                    train: train.filter_classes(&[c])?,
                    test: test.filter_classes(&[c])?,
                    train_reads: Cell::new(0),
                },
            );
        }
        Ok(ClassStream {
            per_class,
            dim: train.dim(),
        })
    }

    pub fn classes(&self) -> Vec<u32> {
        self.per_class.keys().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Labeled training data of one class; counted.
    pub fn train_split(&self, class: u32) -> Result<&LabeledDataset> {
        let data = self
            .per_class
            .get(&class)
            .ok_or_else(|| Error::input(format!("unknown class {}", class)))?;
        data.train_reads.set(data.train_reads.get() + 1);
        Ok(&data.train)
    }

    pub fn test_split(&self, class: u32) -> Result<&LabeledDataset> {
        self.per_class
            .get(&class)
            .map(|d| &d.test)
            .ok_or_else(|| Error::input(format!("unknown class {}", class)))
    }

    /// How many times this class's labeled training data was handed out.
    pub fn train_reads(&self, class: u32) -> u64 {
        self.per_class
            .get(&class)
            .map_or(0, |d| d.train_reads.get())
    }
}

/// The incremental benchmark: group size, one class ordering and seed per
/// run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSpec {
    pub group_size: usize,
    pub orderings: Vec<Vec<u32>>,
    pub seeds: Vec<u64>,
    /// Reject orderings whose length is not a multiple of `group_size`
    /// instead of letting the last session take the remainder.
    pub strict_groups: bool,
}

impl SessionSpec {
    pub fn num_runs(&self) -> usize {
        self.orderings.len()
    }

    pub fn validate(&self, classes: &[u32]) -> Result<()> {
        if self.group_size == 0 {
            return Err(Error::config("group_size must be >= 1"));
        }
        if self.orderings.is_empty() || self.orderings.len() != self.seeds.len() {
            return Err(Error::config(
                "need one ordering and one seed per run, at least one run",
            ));
        }
        let want: BTreeSet<u32> = classes.iter().copied().collect();
        for ordering in &self.orderings {
            let got: BTreeSet<u32> = ordering.iter().copied().collect();
            if got != want || ordering.len() != want.len() {
                return Err(Error::config(
                    "each ordering must be a permutation of the class set",
                ));
            }
            if self.strict_groups && ordering.len() % self.group_size != 0 {
                return Err(Error::config(
                    "class count is not divisible by group_size",
                ));
            }
        }
        Ok(())
    }
}

/// How the model is carried from one session to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Strategy {
    /// Extend the head and keep training on new data only.
    Finetune,
    /// Freeze everything except the new classes' head rows.
    FixedRepr,
    /// Joint training on all data seen so far (upper bound).
    Oracle,
    /// Train a specialist on the new classes, then consolidate with the old
    /// model over the auxiliary pool.
    Dmc,
    /// Consolidation plus exemplar fine-tuning under a fixed budget.
    DmcPlus { budget: usize },
}

/// Extend the output layer with zero-initialized rows for `new_labels`.
/// Existing logits are unchanged for every input.
pub fn extend_output_layer(model: &Model, new_labels: &[u32]) -> Result<Model> {
    for l in new_labels {
        if model.class_labels.contains(l) {
            return Err(Error::config(format!("class {} already served", l)));
        }
    }
    let old_out = model.spec.output_dim();
    let new_out = old_out + new_labels.len();
    let spec = model.spec.with_output_dim(new_out)?;
    let mut params = model.params.clone();
    let wi = params.len() - 2;
    let old_w = &model.params[wi];
    let mut w = Matrix::zeros(new_out, old_w.cols());
    for r in 0..old_out {
        w.row_mut(r).copy_from_slice(old_w.row(r));
    }
    let mut b = Matrix::zeros(1, new_out);
    b.data_mut()[..old_out].copy_from_slice(model.params[wi + 1].data());
    params[wi] = w;
    params[wi + 1] = b;
    let mut class_labels = model.class_labels.clone();
    class_labels.extend_from_slice(new_labels);
    Ok(Model {
        spec,
        params,
        class_labels,
    })
}

/// Direct fine-tuning on new-class data with every parameter trainable.
pub fn finetune_step(
    model: &Model,
    d_new: &LabeledDataset,
    new_labels: &[u32],
    cfg: &TrainConfig,
) -> Result<Model> {
    let extended = extend_output_layer(model, new_labels)?;
    train_supervised(&extended, d_new, cfg)
}

/// Fine-tune only the classifier rows of the new classes; hidden layers and
/// old-class rows stay byte-identical.
pub fn fixed_repr_step(
    model: &Model,
    d_new: &LabeledDataset,
    new_labels: &[u32],
    cfg: &TrainConfig,
) -> Result<Model> {
    let extended = extend_output_layer(model, new_labels)?;
    let mut mask = extended.zero_like_params();
    let wi = mask.len() - 2;
    let first_new = extended.num_classes() - new_labels.len();
    for r in first_new..extended.num_classes() {
        for v in mask[wi].row_mut(r) {
            *v = 1.0;
        }
        mask[wi + 1].set(0, r, 1.0);
    }
    train_supervised_masked(&extended, d_new, cfg, Some(&mask))
}

/// Joint training from scratch on everything seen so far.
pub fn oracle_step(
    arch: &MlpSpec,
    all_seen: &LabeledDataset,
    labels: &[u32],
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<Model> {
    let spec = arch.with_output_dim(labels.len())?;
    let fresh = init_model(&spec, labels, init_seed)?;
    train_supervised(&fresh, all_seen, cfg)
}

/// Train a fresh specialist on the new classes, then consolidate it with
/// the old model over the auxiliary pool. The old model is not modified.
pub fn dmc_step(
    old: &Model,
    d_new: &LabeledDataset,
    new_labels: &[u32],
    aux: &AuxiliaryPool,
    train_cfg: &TrainConfig,
    ccfg: &ConsolidationConfig,
    seed: u64,
) -> Result<Model> {
    let spec_new = old.spec.with_output_dim(new_labels.len())?;
    let fresh = init_model(&spec_new, new_labels, derive_seed(seed, 1, 0xD1))?;
    let specialist = train_supervised(&fresh, d_new, &train_cfg.with_seed(derive_seed(seed, 2, 0xD1)))?;
    let student_spec = old
        .spec
        .with_output_dim(old.num_classes() + new_labels.len())?;
    let mut cc = ccfg.clone();
    cc.train = cc.train.with_seed(derive_seed(seed, 3, 0xD1));
    let out = consolidate(old, &specialist, aux, &cc, &student_spec, derive_seed(seed, 4, 0xD1))?;
    Ok(out.student)
}

/// Exemplar variant: after consolidation of incremental session `i` (1-based
/// after the initial group), store `floor(K/(g*i))` random samples per new
/// class, fine-tune on the store for 15 epochs at lr 1e-3, then shrink every
/// class to `floor(K/(g*(i+1)))`.
pub fn dmcplus_step(
    consolidated: &Model,
    store: &mut ExemplarStore,
    d_new: &LabeledDataset,
    new_labels: &[u32],
    session_index: usize,
    group_size: usize,
    seed: u64,
    base_cfg: &TrainConfig,
) -> Result<Model> {
    let k = store.budget();
    let i = session_index;
    if i == 0 {
        return Err(Error::config("the initial session only fills the store"));
    }
    let add = k / (group_size * i);
    for (j, &c) in new_labels.iter().enumerate() {
        store.add_random(c, d_new, add, derive_seed(seed, 5, j as u64))?;
    }
    let ft_cfg = TrainConfig {
        epochs: 15,
        lr0: 1e-3,
        lr_drop_points: vec![],
        seed: derive_seed(seed, 6, 0xE8),
        ..base_cfg.clone()
    };
    let tuned = train_supervised(consolidated, &store.as_dataset()?, &ft_cfg)?;
    store.shrink_to(k / (group_size * (i + 1)), derive_seed(seed, 7, 0xE8))?;
    Ok(tuned)
}

fn concat_splits<'a>(
    stream: &'a ClassStream,
    classes: &[u32],
    train: bool,
) -> Result<LabeledDataset> {
    let parts: Vec<&LabeledDataset> = classes
        .iter()
        .map(|&c| {
            if train {
                stream.train_split(c)
            } else {
                stream.test_split(c)
            }
        })
        .collect::<Result<_>>()?;
    LabeledDataset::concat(&parts)
}

fn evaluate_session(
    model: &Model,
    stream: &ClassStream,
    run: usize,
    session: usize,
    seen: &[u32],
    first_group: &[u32],
) -> Result<MetricsRecord> {
    let test = concat_splits(stream, seen, false)?;
    let top1 = top1_accuracy(model, &test)?;
    let confusion = confusion_matrix(model, &test)?;
    let per_class_accuracy = seen
        .iter()
        .map(|&c| top1_accuracy(model, stream.test_split(c)?))
        .collect::<Result<Vec<_>>>()?;
    let first_test = concat_splits(stream, first_group, false)?;
    let first_group_accuracy = top1_accuracy(model, &first_test)?;
    Ok(MetricsRecord {
        run,
        session,
        seen_classes: seen.to_vec(),
        per_class_accuracy,
        top1,
        confusion,
        first_group_accuracy,
    })
}

/// Run the full benchmark; returns one record per session per run.
pub fn run_benchmark(
    stream: &ClassStream,
    spec: &SessionSpec,
    strategy: Strategy,
    arch: &MlpSpec,
    train_cfg: &TrainConfig,
    ccfg: &ConsolidationConfig,
    aux: &AuxiliaryPool,
) -> Result<Vec<Vec<MetricsRecord>>> {
    let classes = stream.classes();
    spec.validate(&classes)?;
    train_cfg.validate()?;
    ccfg.validate()?;
    if arch.input_dim() != stream.dim() {
        return Err(Error::config("architecture input width vs data dimension"));
    }
    if let Strategy::DmcPlus { budget } = strategy {
        if budget < classes.len() {
            return Err(Error::config(
                "exemplar budget must cover at least one sample per class",
            ));
        }
    }

    let mut all_runs = Vec::with_capacity(spec.num_runs());
    for run in 0..spec.num_runs() {
        let run_seed = spec.seeds[run];
        let groups: Vec<Vec<u32>> = spec.orderings[run]
            .chunks(spec.group_size)
            .map(|g| {
                let mut g = g.to_vec();
                g.sort_unstable();
                g
            })
            .collect();

        let mut store = match strategy {
            Strategy::DmcPlus { budget } => Some(ExemplarStore::new(budget)),
            _ => None,
        };
        let mut records = Vec::with_capacity(groups.len());
        let mut model: Option<Model> = None;
        let mut seen: Vec<u32> = Vec::new();
        for (si, group) in groups.iter().enumerate() {
            let session_seed = derive_seed(run_seed, si as u64, 0x5E55);
            let cfg_s = train_cfg.with_seed(derive_seed(session_seed, 0, 1));
            let next = match (&model, strategy) {
                (None, _) => {
                    // first session: plain supervised training for every
                    // strategy
                    let d = concat_splits(stream, group, true)?;
                    let spec0 = arch.with_output_dim(group.len())?;
                    let fresh = init_model(&spec0, group, derive_seed(session_seed, 1, 2))?;
                    let trained = train_supervised(&fresh, &d, &cfg_s)?;
                    if let Some(store) = store.as_mut() {
                        let fill = store.budget() / spec.group_size;
                        for (j, &c) in group.iter().enumerate() {
                            store.add_random(c, &d, fill, derive_seed(session_seed, 2, j as u64))?;
                        }
                    }
                    trained
                }
                (Some(old), Strategy::Finetune) => {
                    let d = concat_splits(stream, group, true)?;
                    finetune_step(old, &d, group, &cfg_s)?
                }
                (Some(old), Strategy::FixedRepr) => {
                    let d = concat_splits(stream, group, true)?;
                    fixed_repr_step(old, &d, group, &cfg_s)?
                }
                (Some(_), Strategy::Oracle) => {
                    let mut all: Vec<u32> = seen.clone();
                    all.extend_from_slice(group);
                    let d = concat_splits(stream, &all, true)?;
                    oracle_step(arch, &d, &all, &cfg_s, derive_seed(session_seed, 3, 4))?
                }
                (Some(old), Strategy::Dmc) => {
                    let d = concat_splits(stream, group, true)?;
                    dmc_step(old, &d, group, aux, train_cfg, ccfg, session_seed)?
                }
                (Some(old), Strategy::DmcPlus { .. }) => {
                    let d = concat_splits(stream, group, true)?;
                    let consolidated =
                        dmc_step(old, &d, group, aux, train_cfg, ccfg, session_seed)?;
                    dmcplus_step(
                        &consolidated,
                        store.as_mut().unwrap(),
                        &d,
                        group,
                        si,
                        spec.group_size,
                        session_seed,
                        train_cfg,
                    )?
                }
            };
            seen.extend_from_slice(group);
            records.push(evaluate_session(&next, stream, run, si + 1, &seen, &groups[0])?);
            model = Some(next);
        }
        all_runs.push(records);
    }
    Ok(all_runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, AuxKind, GeneratorKind, GeneratorSpec};
    use crate::distill::LossKind;
    use crate::nn::forward_logits;

    fn toy_setup(
        classes: u32,
        seed: u64,
    ) -> (ClassStream, AuxiliaryPool, MlpSpec, TrainConfig, ConsolidationConfig) {
        let gspec = GeneratorSpec {
            kind: GeneratorKind::GaussianBlobs,
            classes,
            samples_per_class: 30,
            test_samples_per_class: 15,
            dim: 2,
            dispersion: 0.15,
            seed,
            aux_kind: AuxKind::BroadUniform,
            aux_size: 400,
        };
        let (train, test, aux) = generate(&gspec).unwrap();
        let stream = ClassStream::from_splits(&train, &test).unwrap();
        let arch = MlpSpec::new(vec![2, 16, 1]).unwrap();
        let tcfg = TrainConfig {
            epochs: 40,
            batch_size: 16,
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_drop_points: vec![0.7, 0.9],
            seed: 0,
        };
        let ccfg = ConsolidationConfig {
            train: TrainConfig {
                epochs: 30,
                lr0: 0.05,
                ..tcfg.clone()
            },
            loss: LossKind::L2,
            aux_batch_size: 32,
        };
        (stream, aux, arch, tcfg, ccfg)
    }

    fn session_spec(classes: u32, runs: usize) -> SessionSpec {
        let base: Vec<u32> = (0..classes).collect();
        SessionSpec {
            group_size: 2,
            orderings: vec![base; runs],
            seeds: (0..runs as u64).map(|i| 100 + i).collect(),
            strict_groups: true,
        }
    }

    #[test]
    fn extension_preserves_old_logits() {
        let (stream, _, arch, tcfg, _) = toy_setup(4, 1);
        let spec0 = arch.with_output_dim(2).unwrap();
        let m = init_model(&spec0, &[0, 1], 5).unwrap();
        let d = stream.train_split(0).unwrap();
        let trained = train_supervised(&m, d, &tcfg).unwrap();
        let ext = extend_output_layer(&trained, &[2, 3]).unwrap();
        let x = d.features.select_rows(&[0, 1, 2]);
        let before = forward_logits(&trained, &x).unwrap();
        let after = forward_logits(&ext, &x).unwrap();
        for i in 0..3 {
            assert_eq!(&after.row(i)[..2], before.row(i));
            // zero-init rows give zero logits for the new classes
            assert_eq!(&after.row(i)[2..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn extension_zero_rows_never_win_when_old_logit_positive() {
        let (stream, _, arch, tcfg, _) = toy_setup(4, 2);
        let spec0 = arch.with_output_dim(2).unwrap();
        let m = init_model(&spec0, &[0, 1], 5).unwrap();
        let d0 = stream.train_split(0).unwrap();
        let d1 = stream.train_split(1).unwrap();
        let d = LabeledDataset::concat(&[d0, d1]).unwrap();
        let trained = train_supervised(&m, &d, &tcfg).unwrap();
        let ext = extend_output_layer(&trained, &[2, 3]).unwrap();
        let logits = forward_logits(&ext, &d.features).unwrap();
        for i in 0..logits.rows() {
            let row = logits.row(i);
            let max_old = row[..2].iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            if max_old > 0.0 {
                assert!(row[2..].iter().all(|&v| v < max_old));
            }
        }
    }

    #[test]
    fn finetune_learns_new_classes() {
        let (stream, _, arch, tcfg, _) = toy_setup(4, 3);
        let spec0 = arch.with_output_dim(2).unwrap();
        let m = init_model(&spec0, &[0, 1], 5).unwrap();
        let d_old =
            LabeledDataset::concat(&[stream.train_split(0).unwrap(), stream.train_split(1).unwrap()])
                .unwrap();
        let old = train_supervised(&m, &d_old, &tcfg).unwrap();
        let d_new =
            LabeledDataset::concat(&[stream.train_split(2).unwrap(), stream.train_split(3).unwrap()])
                .unwrap();
        let tuned = finetune_step(&old, &d_new, &[2, 3], &tcfg).unwrap();
        let acc = top1_accuracy(&tuned, &d_new).unwrap();
        assert!(acc >= 0.9, "new-class training accuracy {}", acc);
    }

    #[test]
    fn fixed_repr_freezes_everything_but_new_rows() {
        let (stream, _, arch, tcfg, _) = toy_setup(4, 4);
        let spec0 = arch.with_output_dim(2).unwrap();
        let m = init_model(&spec0, &[0, 1], 5).unwrap();
        let d_old = stream.train_split(0).unwrap();
        let old = train_supervised(&m, d_old, &tcfg).unwrap();
        let d_new = stream.train_split(2).unwrap();
        let stepped = fixed_repr_step(&old, d_new, &[2], &tcfg).unwrap();

        // hidden layers byte-identical
        for t in 0..old.params.len() - 2 {
            assert_eq!(stepped.params[t], old.params[t]);
        }
        // old classifier rows byte-identical
        let wi = old.params.len() - 2;
        for r in 0..2 {
            assert_eq!(stepped.params[wi].row(r), old.params[wi].row(r));
            assert_eq!(
                stepped.params[wi + 1].get(0, r),
                old.params[wi + 1].get(0, r)
            );
        }
        // new row moved
        assert!(stepped.params[wi].row(2).iter().any(|&v| v != 0.0));

        // hidden representation of any input unchanged: old logits of the
        // stepped model equal the old model's logits
        let x = d_new.features.select_rows(&[0, 1]);
        let a = forward_logits(&old, &x).unwrap();
        let b = forward_logits(&stepped, &x).unwrap();
        for i in 0..2 {
            assert_eq!(&b.row(i)[..2], a.row(i));
        }
    }

    #[test]
    fn oracle_step_matches_train_supervised() {
        let (stream, _, arch, tcfg, _) = toy_setup(2, 5);
        let d = LabeledDataset::concat(&[
            stream.train_split(0).unwrap(),
            stream.train_split(1).unwrap(),
        ])
        .unwrap();
        let a = oracle_step(&arch, &d, &[0, 1], &tcfg, 77).unwrap();
        let spec0 = arch.with_output_dim(2).unwrap();
        let fresh = init_model(&spec0, &[0, 1], 77).unwrap();
        let b = train_supervised(&fresh, &d, &tcfg).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn dmc_step_labels_are_old_then_new_sorted() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(4, 6);
        let spec0 = arch.with_output_dim(2).unwrap();
        let m = init_model(&spec0, &[0, 1], 5).unwrap();
        let d_old =
            LabeledDataset::concat(&[stream.train_split(0).unwrap(), stream.train_split(1).unwrap()])
                .unwrap();
        let old = train_supervised(&m, &d_old, &tcfg).unwrap();
        let d_new =
            LabeledDataset::concat(&[stream.train_split(2).unwrap(), stream.train_split(3).unwrap()])
                .unwrap();
        let merged = dmc_step(&old, &d_new, &[2, 3], &aux, &tcfg, &ccfg, 9).unwrap();
        assert_eq!(merged.class_labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn dmc_rejects_overlapping_classes() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(4, 6);
        let spec0 = arch.with_output_dim(2).unwrap();
        let m = init_model(&spec0, &[0, 1], 5).unwrap();
        let d = stream.train_split(1).unwrap();
        assert!(dmc_step(&m, d, &[1], &aux, &tcfg, &ccfg, 0).is_err());
    }

    #[test]
    fn single_session_reduces_every_strategy_to_plain_training() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(2, 7);
        let spec = SessionSpec {
            group_size: 2,
            orderings: vec![vec![0, 1]],
            seeds: vec![55],
            strict_groups: true,
        };
        let ft = run_benchmark(&stream, &spec, Strategy::Finetune, &arch, &tcfg, &ccfg, &aux)
            .unwrap();
        let or = run_benchmark(&stream, &spec, Strategy::Oracle, &arch, &tcfg, &ccfg, &aux)
            .unwrap();
        assert_eq!(ft[0].len(), 1);
        assert_eq!(ft[0][0].top1, or[0][0].top1);
    }

    #[test]
    fn finetune_forgets_and_learns() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(4, 8);
        let spec = session_spec(4, 1);
        let recs =
            run_benchmark(&stream, &spec, Strategy::Finetune, &arch, &tcfg, &ccfg, &aux).unwrap();
        let last = &recs[0][1];
        // catastrophic forgetting: session-1 classes near zero, session-2
        // classes near perfect
        let old_acc = (last.per_class_accuracy[0] + last.per_class_accuracy[1]) / 2.0;
        let new_acc = (last.per_class_accuracy[2] + last.per_class_accuracy[3]) / 2.0;
        assert!(old_acc < 1.0 / 4.0 + 0.1, "old-class accuracy {}", old_acc);
        assert!(new_acc > 0.9, "new-class accuracy {}", new_acc);
    }

    #[test]
    fn data_access_discipline() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(4, 9);
        let spec = session_spec(4, 1);
        run_benchmark(&stream, &spec, Strategy::Dmc, &arch, &tcfg, &ccfg, &aux).unwrap();
        // each class's labeled training data is handed out exactly once, in
        // its own session
        for c in 0..4 {
            assert_eq!(stream.train_reads(c), 1, "class {}", c);
        }
    }

    #[test]
    fn label_space_growth_follows_the_ordering() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(4, 10);
        let mut spec = session_spec(4, 1);
        spec.orderings[0] = vec![2, 0, 3, 1];
        let recs =
            run_benchmark(&stream, &spec, Strategy::Finetune, &arch, &tcfg, &ccfg, &aux).unwrap();
        let mut s1: Vec<u32> = recs[0][0].seen_classes.clone();
        s1.sort_unstable();
        assert_eq!(s1, vec![0, 2]);
        let mut s2: Vec<u32> = recs[0][1].seen_classes.clone();
        s2.sort_unstable();
        assert_eq!(s2, vec![0, 1, 2, 3]);
    }

    #[test]
    fn non_divisible_classes_respect_strict_flag() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(3, 11);
        let mut spec = SessionSpec {
            group_size: 2,
            orderings: vec![vec![0, 1, 2]],
            seeds: vec![9],
            strict_groups: true,
        };
        assert!(run_benchmark(&stream, &spec, Strategy::Finetune, &arch, &tcfg, &ccfg, &aux)
            .is_err());
        spec.strict_groups = false;
        let recs =
            run_benchmark(&stream, &spec, Strategy::Finetune, &arch, &tcfg, &ccfg, &aux).unwrap();
        assert_eq!(recs[0].len(), 2);
        assert_eq!(recs[0][1].seen_classes.len(), 3);
    }

    #[test]
    fn dmcplus_budget_must_cover_classes() {
        let (stream, aux, arch, tcfg, ccfg) = toy_setup(4, 12);
        let spec = session_spec(4, 1);
        assert!(run_benchmark(
            &stream,
            &spec,
            Strategy::DmcPlus { budget: 3 },
            &arch,
            &tcfg,
            &ccfg,
            &aux
        )
        .is_err());
    }
}
