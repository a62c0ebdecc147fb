use crate::data::{labels_from_times, Sample};
use crate::error::Result;
use crate::model::{loss, AblationConfig, Dropout, ModelConfig, ModelParams, Targets};
use crate::numerics::{grad_check_detailed, normal_tensor, GradCheck, SplitRng, Tape, Var};

/// Gradient check result for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub check: GradCheck,
}

/// Random `f64` sample with `m` clips and the given widths.
pub fn random_sample(m: usize, widths: (usize, usize, usize), rng: &mut SplitRng) -> Result<Sample> {
    let video = normal_tensor(&[m, widths.0], rng)?;
    let asr = normal_tensor(&[m, widths.1], rng)?;
    let query = normal_tensor(&[1, widths.2], rng)?;
    let duration_s = 10.0 * m as f64;
    let a = (rng.uniform(0.0, 0.5) * duration_s).floor();
    let b = (a + rng.uniform(0.2, 0.5) * duration_s).min(duration_s);
    let moment = crate::data::Moment { start_s: a, end_s: b };
    Ok(Sample {
        id: "gradcheck".into(),
        video,
        asr,
        query,
        duration_s,
        moment,
        labels: labels_from_times(a, b, duration_s, m)?,
    })
}

/// Largest per-tensor norm-wise relative error.
pub fn worst_norm_error(checks: &[ParamCheck]) -> f64 {
    checks.iter().map(|c| c.check.norm_rel_error).fold(0.0, f64::max)
}

/// Central-difference check of the full training loss, dropout off, against
/// every parameter tensor of a freshly initialized `f64` model.
pub fn model_grad_check(
    d: usize,
    m: usize,
    ablation: AblationConfig,
    lambda: f64,
    seed: u64,
    eps: f64,
) -> Result<Vec<ParamCheck>> {
    let widths = (5, 4, 3);
    let config = ModelConfig::new(d, widths.0, widths.1, widths.2).with_ablation(ablation);
    let model = ModelParams::<f64>::init(config, seed)?;
    let mut rng = SplitRng::new(seed ^ 0x5eed);
    let sample = random_sample(m, widths, &mut rng)?;
    let targets = Targets::<f64>::from_labels(&sample.labels);

    let mut out = Vec::with_capacity(model.store.len());
    for id in model.store.ids() {
        let f = |tape: &mut Tape<f64>, x: Var| {
            let mut p = model.bind(tape);
            p.0[id.index()] = x;
            let v = tape.constant(sample.video.cast());
            let a = tape.constant(sample.asr.cast());
            let q = tape.constant(sample.query.cast());
            let fw = model.forward(tape, &p, v, a, q, &mut Dropout::off())?;
            loss(tape, fw.p_start, fw.p_end, fw.m_2d, &targets, lambda)
        };
        let check = grad_check_detailed(f, model.store.get(id), eps)?;
        out.push(ParamCheck {
            name: model.store.name(id).to_string(),
            check,
        });
    }
    Ok(out)
}
