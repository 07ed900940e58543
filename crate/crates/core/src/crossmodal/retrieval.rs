use super::audio_encoder::audio_encode;
use super::model::ModelParams;
use super::pairs::TrainingPair;
use super::pose_encoder::pose_encode;
use super::Embedding;
use crate::audio::MfccFragment;
use crate::error::{Error, Result};
use crate::pose::{FragmentDatabase, PoseFragment};

/// Copy of `db` with every fragment's pose embedding (re)computed.
pub fn attach_embeddings(model: &ModelParams, db: &FragmentDatabase) -> Result<FragmentDatabase> {
    let mut out = db.clone();
    for frag in &mut out.fragments {
        let e = pose_encode(&model.pose, frag)?;
        if !e.is_finite() {
            return Err(Error::Numerical(format!("non-finite embedding for fragment {}", frag.id())));
        }
        frag.embedding = Some(e);
    }
    Ok(out)
}

/// Index of the stored embedding closest to `query`; ties go to the lowest index.
pub fn nearest_index(query: &Embedding, db: &FragmentDatabase) -> Result<usize> {
    if db.is_empty() {
        return Err(Error::invalid("cannot retrieve from an empty database"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, frag) in db.fragments.iter().enumerate() {
        let e = frag
            .embedding
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("fragment {} has no embedding", frag.id())))?;
        if e.dim() != query.dim() {
            return Err(Error::Shape(format!("query has {} dims, database {}", query.dim(), e.dim())));
        }
        let d = query.distance(e);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    Ok(best.expect("non-empty").0)
}

pub fn retrieve_index(model: &ModelParams, db: &FragmentDatabase, audio_frag: &MfccFragment) -> Result<usize> {
    if db.is_empty() {
        return Err(Error::invalid("cannot retrieve from an empty database"));
    }
    if audio_frag.len() != db.frames_per_fragment() {
        return Err(Error::invalid(format!(
            "audio fragment has {} frames, database fragments {}",
            audio_frag.len(),
            db.frames_per_fragment()
        )));
    }
    let q = audio_encode(&model.audio, audio_frag, false, 0)?;
    nearest_index(&q, db)
}

/// Pose fragment whose embedding is nearest to the audio fragment's.
pub fn retrieve(model: &ModelParams, db: &FragmentDatabase, audio_frag: &MfccFragment) -> Result<PoseFragment> {
    let i = retrieve_index(model, db, audio_frag)?;
    Ok(db.fragments[i].clone())
}

/// Fraction of pairs judged correctly by the rule "corresponding iff the
/// embedding distance is below `threshold`".
pub fn correlation_accuracy(model: &ModelParams, pairs: &[TrainingPair], threshold: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to score"));
    }
    let mut correct = 0usize;
    for p in pairs {
        let a = audio_encode(&model.audio, &p.audio_fragment, false, 0)?;
        let e = pose_encode(&model.pose, &p.pose_fragment)?;
        let judged = e.distance(&a) < threshold;
        if judged == p.label.is_corresponding() {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{build_database, Keypoint, PoseFrame, PoseSequence, Resolution};
    use crate::skeleton::NUM_JOINTS;

    fn db_with(embeddings: &[Vec<f64>]) -> FragmentDatabase {
        let frags = embeddings
            .iter()
            .enumerate()
            .map(|(i, e)| PoseFragment {
                source_id: format!("s{i}"),
                start_frame: 0,
                duration_s: 1,
                sequence: PoseSequence::new(
                    (0..24).map(|t| PoseFrame::new(t, [Keypoint::new(1.0, 2.0, 1.0); NUM_JOINTS])).collect(),
                    24,
                    Resolution::default(),
                ),
                embedding: Some(Embedding::new(e.clone())),
            })
            .collect();
        build_database(frags).unwrap()
    }

    #[test]
    fn exact_match_and_ties() {
        let db = db_with(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(nearest_index(&Embedding::new(vec![0.0, 1.0]), &db).unwrap(), 1);
        assert_eq!(nearest_index(&Embedding::new(vec![0.9, 0.1]), &db).unwrap(), 0);
    }

    #[test]
    fn single_fragment_always_returned() {
        let db = db_with(&[vec![5.0, 5.0]]);
        assert_eq!(nearest_index(&Embedding::new(vec![-3.0, 1.0]), &db).unwrap(), 0);
    }

    #[test]
    fn empty_database_is_an_error() {
        let db = build_database(vec![]).unwrap();
        assert!(nearest_index(&Embedding::new(vec![0.0]), &db).is_err());
    }
}
