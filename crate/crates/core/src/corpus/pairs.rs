use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Iambic, Special, TuneRegistry, Vocabulary};

/// Encoder input and decoder target for one iambic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainPair {
    /// `BOS`, first line, its terminator, `EOS`.
    pub cue_ids: Vec<usize>,
    /// Remaining lines with terminators, then `EOS`.
    pub target_ids: Vec<usize>,
    pub tune_id: usize,
}

pub fn make_train_pairs(
    iambics: &[Iambic],
    vocab: &Vocabulary,
    registry: &TuneRegistry,
) -> Result<Vec<TrainPair>, CorpusError> {
    iambics
        .iter()
        .enumerate()
        .map(|(index, iambic)| {
            let tune_id =
                registry
                    .id_of(&iambic.tune_name)
                    .ok_or_else(|| CorpusError::UnregisteredTune {
                        index,
                        tune: iambic.tune_name.clone(),
                    })?;
            if iambic.lines.len() < 2 {
                return Err(CorpusError::TooFewLines {
                    index,
                    lines: iambic.lines.len(),
                });
            }
            let first = &iambic.lines[0];
            let mut cue_ids = Vec::with_capacity(first.text.len() + 3);
            cue_ids.push(Special::Bos.id());
            cue_ids.extend(vocab.encode(&first.text));
            cue_ids.push(vocab.encode_char(first.terminator));
            cue_ids.push(Special::Eos.id());
            let mut target_ids = Vec::new();
            for line in &iambic.lines[1..] {
                target_ids.extend(vocab.encode(&line.text));
                target_ids.push(vocab.encode_char(line.terminator));
            }
            target_ids.push(Special::Eos.id());
            Ok(TrainPair {
                cue_ids,
                target_ids,
                tune_id,
            })
        })
        .collect()
}

/// Seeded hold-out split: `test_count` iambics go to the test side; both
/// sides keep corpus order.
pub fn split_holdout(
    iambics: &[Iambic],
    test_count: usize,
    seed: u64,
) -> Result<(Vec<Iambic>, Vec<Iambic>), CorpusError> {
    if test_count > iambics.len() {
        return Err(CorpusError::HoldoutTooLarge {
            requested: test_count,
            available: iambics.len(),
        });
    }
    let mut order: Vec<usize> = (0..iambics.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = alloc::vec![false; iambics.len()];
    for &i in &order[..test_count] {
        is_test[i] = true;
    }
    let mut train = Vec::with_capacity(iambics.len() - test_count);
    let mut test = Vec::with_capacity(test_count);
    for (i, iambic) in iambics.iter().enumerate() {
        if is_test[i] {
            test.push(iambic.clone());
        } else {
            train.push(iambic.clone());
        }
    }
    Ok((train, test))
}
