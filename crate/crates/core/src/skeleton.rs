//! COCO-18 keypoint layout.

pub const NUM_JOINTS: usize = 18;

pub const NOSE: usize = 0;
pub const NECK: usize = 1;
pub const R_SHOULDER: usize = 2;
pub const R_ELBOW: usize = 3;
pub const R_WRIST: usize = 4;
pub const L_SHOULDER: usize = 5;
pub const L_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;
pub const R_HIP: usize = 8;
pub const R_KNEE: usize = 9;
pub const R_ANKLE: usize = 10;
pub const L_HIP: usize = 11;
pub const L_KNEE: usize = 12;
pub const L_ANKLE: usize = 13;
pub const R_EYE: usize = 14;
pub const L_EYE: usize = 15;
pub const R_EAR: usize = 16;
pub const L_EAR: usize = 17;

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
];

/// Skeleton bones, drawn by the renderer and used as the pose graph.
pub const EDGES: [(usize, usize); 17] = [
    (NECK, R_SHOULDER),
    (NECK, L_SHOULDER),
    (R_SHOULDER, R_ELBOW),
    (R_ELBOW, R_WRIST),
    (L_SHOULDER, L_ELBOW),
    (L_ELBOW, L_WRIST),
    (NECK, R_HIP),
    (R_HIP, R_KNEE),
    (R_KNEE, R_ANKLE),
    (NECK, L_HIP),
    (L_HIP, L_KNEE),
    (L_KNEE, L_ANKLE),
    (NECK, NOSE),
    (NOSE, R_EYE),
    (R_EYE, R_EAR),
    (NOSE, L_EYE),
    (L_EYE, L_EAR),
];

/// Hand proxies (wrists).
pub const HAND_JOINTS: [usize; 2] = [R_WRIST, L_WRIST];
/// Foot proxies (ankles).
pub const FOOT_JOINTS: [usize; 2] = [R_ANKLE, L_ANKLE];

/// Body part selector for metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyPart {
    Hand,
    Foot,
}

impl BodyPart {
    pub fn joints(self) -> [usize; 2] {
        match self {
            BodyPart::Hand => HAND_JOINTS,
            BodyPart::Foot => FOOT_JOINTS,
        }
    }
}

pub fn is_extremity(joint: usize) -> bool {
    HAND_JOINTS.contains(&joint) || FOOT_JOINTS.contains(&joint)
}

/// 0/1 adjacency without self loops.
pub fn adjacency() -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; NUM_JOINTS]; NUM_JOINTS];
    for &(i, j) in EDGES.iter() {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_is_a_tree_over_all_joints() {
        assert_eq!(EDGES.len(), NUM_JOINTS - 1);
        let mut seen = [false; NUM_JOINTS];
        seen[NECK] = true;
        for _ in 0..NUM_JOINTS {
            for &(a, b) in EDGES.iter() {
                if seen[a] || seen[b] {
                    seen[a] = true;
                    seen[b] = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn adjacency_symmetric_without_self_loops() {
        let a = adjacency();
        for i in 0..NUM_JOINTS {
            assert_eq!(a[i][i], 0.0);
            for j in 0..NUM_JOINTS {
                assert_eq!(a[i][j], a[j][i]);
            }
        }
    }
}
