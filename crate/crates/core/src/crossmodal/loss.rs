use crate::error::{Error, Result};

/// How the margin enters the loss for non-corresponding pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginMode {
    /// `max(0, ε - ||p - a||)^2`
    Hinge,
    /// `||p - a - ε·1||^2`
    Offset,
}

impl MarginMode {
    pub fn code(self) -> u32 {
        match self {
            MarginMode::Hinge => 0,
            MarginMode::Offset => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(MarginMode::Hinge),
            1 => Some(MarginMode::Offset),
            _ => None,
        }
    }
}

impl std::str::FromStr for MarginMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hinge" => Ok(MarginMode::Hinge),
            "offset" => Ok(MarginMode::Offset),
            other => Err(format!("unknown margin mode '{other}' (hinge|offset)")),
        }
    }
}

pub fn matching_loss(p: &[f64], a: &[f64], corresponding: bool, margin: f64, mode: MarginMode) -> Result<f64> {
    matching_loss_grad(p, a, corresponding, margin, mode).map(|(l, _)| l)
}

/// Loss and its gradient with respect to `p` (the gradient for `a` is the negation).
pub fn matching_loss_grad(
    p: &[f64],
    a: &[f64],
    corresponding: bool,
    margin: f64,
    mode: MarginMode,
) -> Result<(f64, Vec<f64>)> {
    if p.len() != a.len() {
        return Err(Error::Shape(format!("embedding dimensions {} and {} differ", p.len(), a.len())));
    }
    let delta: Vec<f64> = p.iter().zip(a).map(|(x, y)| x - y).collect();
    let sq: f64 = delta.iter().map(|d| d * d).sum();
    if corresponding {
        return Ok((sq, delta.iter().map(|d| 2.0 * d).collect()));
    }
    match mode {
        MarginMode::Offset => {
            let shifted: Vec<f64> = delta.iter().map(|d| d - margin).collect();
            let loss = shifted.iter().map(|d| d * d).sum();
            Ok((loss, shifted.iter().map(|d| 2.0 * d).collect()))
        }
        MarginMode::Hinge => {
            let dist = sq.sqrt();
            if dist >= margin || dist == 0.0 {
                let loss = if dist >= margin { 0.0 } else { margin * margin };
                return Ok((loss, vec![0.0; delta.len()]));
            }
            let gap = margin - dist;
            let scale = -2.0 * gap / dist;
            Ok((gap * gap, delta.iter().map(|d| scale * d).collect()))
        }
    }
}
