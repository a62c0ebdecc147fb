use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::layers::{BiGruLayer, Bound, Conv1dLayer, LinearLayer, ParamStore};
use crate::numerics::{Scalar, SplitRng, Tape, Tensor, Var};

/// Dropout switch threaded through a forward pass. Training passes carry a
/// generator; evaluation passes do not.
pub struct Dropout<'r> {
    rate: f64,
    rng: Option<&'r mut SplitRng>,
}

impl<'r> Dropout<'r> {
    pub fn off() -> Self {
        Self { rate: 0.0, rng: None }
    }

    pub fn train(rate: f64, rng: &'r mut SplitRng) -> Self {
        Self {
            rate,
            rng: Some(rng),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    fn apply<T: Scalar>(&mut self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        match self.rng.as_deref_mut() {
            Some(rng) => tape.dropout(x, self.rate, true, rng),
            None => Ok(x),
        }
    }
}

/// Start or end pointer: a query-interaction branch and a compression branch,
/// averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointerHead {
    /// `d → d`, followed by GELU and a dot product with the query.
    pub interact: LinearLayer,
    /// `d → 1`.
    pub compress: LinearLayer,
}

/// Gated 2D probability encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoDpEncoder {
    pub gate: LinearLayer,
    pub map: LinearLayer,
    pub row: LinearLayer,
    pub col: LinearLayer,
}

/// Every learnable tensor of the network plus the layer handles into it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub proj_video: LinearLayer,
    pub proj_asr: LinearLayer,
    pub proj_query: LinearLayer,
    pub conv: Conv1dLayer,
    pub gru: BiGruLayer,
    pub start: PointerHead,
    pub end: PointerHead,
    pub twodp: TwoDpEncoder,
}

/// Tape handles produced by one forward pass. Heads removed by the ablation
/// config are `None`.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub h_av: Var,
    pub h_q: Var,
    pub p_start: Option<Var>,
    pub p_end: Option<Var>,
    pub m_2d: Option<Var>,
    pub gate: Option<Var>,
}

/// Outputs of the 2DP-Encoder.
#[derive(Debug, Clone, Copy)]
pub struct TwoDpVars {
    pub m_2d: Var,
    pub gate: Var,
}

impl<T: Scalar> ModelParams<T> {
    /// Deterministic initialization: Xavier weights, zero biases, parameters
    /// drawn in declaration order from one seeded stream.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitRng::new(seed);
        let rng = &mut rng;
        let d = config.d;
        let mut store = ParamStore::new();
        let s = &mut store;
        let proj_video = LinearLayer::new(s, "proj.video", config.d_video, d, rng)?;
        let proj_asr = LinearLayer::new(s, "proj.asr", config.d_asr, d, rng)?;
        let proj_query = LinearLayer::new(s, "proj.query", config.d_query, d, rng)?;
        let conv = Conv1dLayer::new(s, "av.conv", config.conv_width, d, rng)?;
        let gru = BiGruLayer::new(s, "av.gru", d, rng)?;
        let mut head = |name: &str, s: &mut ParamStore<T>| -> Result<PointerHead> {
            Ok(PointerHead {
                interact: LinearLayer::new(s, &format!("{name}.interact"), d, d, rng)?,
                compress: LinearLayer::new(s, &format!("{name}.compress"), d, 1, rng)?,
            })
        };
        let start = head("pointer.start", s)?;
        let end = head("pointer.end", s)?;
        let twodp = TwoDpEncoder {
            gate: LinearLayer::new(s, "twodp.gate", d, d, rng)?,
            map: LinearLayer::new(s, "twodp.map", d, d, rng)?,
            row: LinearLayer::new(s, "twodp.row", d, 1, rng)?,
            col: LinearLayer::new(s, "twodp.col", d, 1, rng)?,
        };
        Ok(Self {
            config,
            store,
            proj_video,
            proj_asr,
            proj_query,
            conv,
            gru,
            start,
            end,
            twodp,
        })
    }

    /// Same network with every tensor converted to another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            store: self.store.cast(),
            proj_video: self.proj_video,
            proj_asr: self.proj_asr,
            proj_query: self.proj_query,
            conv: self.conv,
            gru: self.gru,
            start: self.start,
            end: self.end,
            twodp: self.twodp,
        }
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        self.store.bind(tape)
    }

    /// Projects raw video (`m × d_v`), ASR (`m × d_a`) and query (`d_q` or
    /// `1 × d_q`) features into the shared width `d`.
    pub fn project_inputs(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        video: Var,
        asr: Var,
        query: Var,
    ) -> Result<(Var, Var, Var)> {
        let (mv, _) = tape.value(video).dims2()?;
        let (ma, _) = tape.value(asr).dims2()?;
        if mv != ma {
            return Err(Error::shape("project_inputs", tape.shape(video), tape.shape(asr)));
        }
        let q = match tape.shape(query) {
            [n] => {
                let n = *n;
                tape.reshape(query, &[1, n])?
            }
            _ => query,
        };
        let h_v = self.proj_video.forward(tape, p, video)?;
        let h_a = self.proj_asr.forward(tape, p, asr)?;
        let h_q = self.proj_query.forward(tape, p, q)?;
        let (rows, _) = tape.value(h_q).dims2()?;
        if rows != 1 {
            return Err(Error::InvalidArgument(format!(
                "query must be a single vector, got {rows} rows"
            )));
        }
        let h_q = tape.reshape(h_q, &[self.config.d])?;
        Ok((h_v, h_a, h_q))
    }

    /// Coarse-grained encoding: broadcast max-pooled product, temporal
    /// convolution, then the bidirectional GRU. Identity when the AV-Encoder
    /// is ablated.
    pub fn av_encode(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        h_f: Var,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        if !self.config.ablation.use_av_encoder {
            return Ok(h_f);
        }
        let pooled = tape.max_over_rows(h_f)?;
        let x = tape.mul_row(h_f, pooled)?;
        let x = dropout.apply(tape, x)?;
        let x = self.conv.forward_clipped(tape, p, x)?;
        self.gru.forward(tape, p, x)
    }

    /// Length-`m` boundary distribution: mean of the query-interaction and
    /// compression branches, each squashed by TaLU.
    pub fn pointer_forward(
        &self,
        head: &PointerHead,
        tape: &mut Tape<T>,
        p: &Bound,
        h_av: Var,
        h_q: Var,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        let (m, _) = tape.value(h_av).dims2()?;
        let x = dropout.apply(tape, h_av)?;
        let h = head.interact.forward(tape, p, x)?;
        let h = tape.gelu(h);
        let scores = tape.matvec(h, h_q)?;
        let p_h = tape.talu(scores);

        let x = dropout.apply(tape, h_av)?;
        let c = head.compress.forward(tape, p, x)?;
        let c = tape.reshape(c, &[m])?;
        let p_c = tape.talu(c);

        let sum = tape.add(p_h, p_c)?;
        Ok(tape.scale(sum, T::of(0.5)))
    }

    /// Gated interactive attention and the four-way 2D probability map.
    pub fn twodp_forward(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        h_av: Var,
        h_q: Var,
        dropout: &mut Dropout<'_>,
    ) -> Result<TwoDpVars> {
        let enc = &self.twodp;
        let (m, _) = tape.value(h_av).dims2()?;

        let x = dropout.apply(tape, h_av)?;
        let h_g = enc.gate.forward(tape, p, x)?;
        let h_g = tape.gelu(h_g);
        let x = dropout.apply(tape, h_av)?;
        let h_2d = enc.map.forward(tape, p, x)?;
        let h_2d = tape.gelu(h_2d);

        let h_gq = tape.mul_row(h_g, h_q)?;
        let gate = tape.sigmoid(h_gq);
        // g⊙H_2D + (1 − g)⊙H_av == H_av + g⊙(H_2D − H_av)
        let diff = tape.sub(h_2d, h_av)?;
        let gated = tape.mul(gate, diff)?;
        let h_gia = tape.add(h_av, gated)?;

        let scores = tape.matmul_nt(h_2d, h_gia)?;
        let m_2dg = tape.talu(scores);

        let s = tape.add(h_gq, h_2d)?;
        let s = tape.matvec(s, h_q)?;
        let v_2dh = tape.talu(s);
        let rows = tape.expand_rows(v_2dh, m)?;
        let cols = tape.expand_cols(v_2dh, m)?;
        let m_2dh = tape.add(rows, cols)?;
        let m_2dh = tape.scale(m_2dh, T::of(0.5));

        let x = dropout.apply(tape, h_gq)?;
        let r = enc.row.forward(tape, p, x)?;
        let r = tape.reshape(r, &[m])?;
        let r = tape.talu(r);
        let m_row = tape.expand_rows(r, m)?;

        let x = dropout.apply(tape, h_gq)?;
        let c = enc.col.forward(tape, p, x)?;
        let c = tape.reshape(c, &[m])?;
        let c = tape.talu(c);
        let m_col = tape.expand_cols(c, m)?;

        let acc = tape.add(m_2dg, m_2dh)?;
        let acc = tape.add(acc, m_row)?;
        let acc = tape.add(acc, m_col)?;
        let m_2d = tape.scale(acc, T::of(0.25));
        Ok(TwoDpVars { m_2d, gate })
    }

    /// Full forward pass from raw features.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        video: Var,
        asr: Var,
        query: Var,
        dropout: &mut Dropout<'_>,
    ) -> Result<ForwardVars> {
        let (h_v, h_a, h_q) = self.project_inputs(tape, p, video, asr, query)?;
        let h_f = fuse_features(tape, h_v, h_a)?;
        let h_av = self.av_encode(tape, p, h_f, dropout)?;
        let ab = self.config.ablation;
        let (p_start, p_end) = if ab.use_pointer {
            let s = self.pointer_forward(&self.start, tape, p, h_av, h_q, dropout)?;
            let e = self.pointer_forward(&self.end, tape, p, h_av, h_q, dropout)?;
            (Some(s), Some(e))
        } else {
            (None, None)
        };
        let (m_2d, gate) = if ab.use_2dp {
            let out = self.twodp_forward(tape, p, h_av, h_q, dropout)?;
            (Some(out.m_2d), Some(out.gate))
        } else {
            (None, None)
        };
        Ok(ForwardVars {
            h_av,
            h_q,
            p_start,
            p_end,
            m_2d,
            gate,
        })
    }

    /// Inference helper: forward pass without dropout, returning the
    /// probability maps as plain tensors.
    pub fn predict_maps(
        &self,
        video: &Tensor<T>,
        asr: &Tensor<T>,
        query: &Tensor<T>,
    ) -> Result<super::ScoreMaps<T>> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let v = tape.constant(video.clone());
        let a = tape.constant(asr.clone());
        let q = tape.constant(query.clone());
        let out = self.forward(&mut tape, &p, v, a, q, &mut Dropout::off())?;
        let get = |v: Option<Var>| v.map(|v| tape.value(v).clone());
        super::ScoreMaps::new(
            get(out.p_start),
            get(out.p_end),
            get(out.m_2d),
            &self.config.ablation,
        )
    }
}

/// `H_f = H_v + H_a`.
pub fn fuse_features<T: Scalar>(tape: &mut Tape<T>, h_v: Var, h_a: Var) -> Result<Var> {
    tape.add(h_v, h_a)
}
