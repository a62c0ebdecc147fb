use crate::error::{Error, Result};

/// Intersection over union of two time intervals `(start, end)`.
pub fn iou(pred: (f64, f64), gold: (f64, f64)) -> Result<f64> {
    for (name, (s, e)) in [("predicted", pred), ("gold", gold)] {
        if !(s < e) {
            return Err(Error::InvalidArgument(format!(
                "{name} interval [{s}, {e}] is empty or inverted"
            )));
        }
    }
    let inter = (pred.1.min(gold.1) - pred.0.max(gold.0)).max(0.0);
    let union = pred.1.max(gold.1) - pred.0.min(gold.0);
    Ok(inter / union)
}

/// Fraction of IoUs at or above `threshold`.
pub fn recall_at_1(ious: &[f64], threshold: f64) -> Result<f64> {
    if ious.is_empty() {
        return Err(Error::InvalidArgument("recall over an empty list".into()));
    }
    let hits = ious.iter().filter(|&&v| v >= threshold).count();
    Ok(hits as f64 / ious.len() as f64)
}
