use super::{Bound, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Scalar, SplitRng, Tape, Tensor, Var};

/// One direction of a GRU.
///
/// ```text
/// z  = σ(x·W_z + h·U_z + b_z)
/// r  = σ(x·W_r + h·U_r + b_r)
/// h̃  = tanh(x·W_h + (r ⊙ h)·U_h + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
    pub d_in: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        hidden: usize,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        let mut w = |gate: &str, store: &mut ParamStore<T>| -> Result<ParamId> {
            Ok(store.add(format!("{name}.w_{gate}"), xavier_init(&[d_in, hidden], rng)?))
        };
        let w_z = w("z", store)?;
        let w_r = w("r", store)?;
        let w_h = w("h", store)?;
        let mut u = |gate: &str, store: &mut ParamStore<T>| -> Result<ParamId> {
            Ok(store.add(format!("{name}.u_{gate}"), xavier_init(&[hidden, hidden], rng)?))
        };
        let u_z = u("z", store)?;
        let u_r = u("r", store)?;
        let u_h = u("h", store)?;
        let b_z = store.add(format!("{name}.b_z"), Tensor::zeros(&[hidden]));
        let b_r = store.add(format!("{name}.b_r"), Tensor::zeros(&[hidden]));
        let b_h = store.add(format!("{name}.b_h"), Tensor::zeros(&[hidden]));
        Ok(Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
            d_in,
            hidden,
        })
    }

    /// Runs the recurrence over the rows of `x` from a zero initial state and
    /// returns the `m × hidden` sequence of states.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        let (m, d) = tape.value(x).dims2()?;
        if d != self.d_in {
            return Err(Error::shape("gru", tape.shape(x), &[self.d_in, self.hidden]));
        }
        let p = |id| params.var(id);
        // Input contributions for all steps at once.
        let xz = tape.matmul(x, p(self.w_z))?;
        let xz = tape.add_row(xz, p(self.b_z))?;
        let xr = tape.matmul(x, p(self.w_r))?;
        let xr = tape.add_row(xr, p(self.b_r))?;
        let xh = tape.matmul(x, p(self.w_h))?;
        let xh = tape.add_row(xh, p(self.b_h))?;

        let mut h = tape.constant(Tensor::zeros(&[1, self.hidden]));
        let mut states = Vec::with_capacity(m);
        for t in 0..m {
            let xz_t = tape.slice_rows(xz, t, 1)?;
            let xr_t = tape.slice_rows(xr, t, 1)?;
            let xh_t = tape.slice_rows(xh, t, 1)?;

            let hz = tape.matmul(h, p(self.u_z))?;
            let z = tape.add(xz_t, hz)?;
            let z = tape.sigmoid(z);

            let hr = tape.matmul(h, p(self.u_r))?;
            let r = tape.add(xr_t, hr)?;
            let r = tape.sigmoid(r);

            let rh = tape.mul(r, h)?;
            let hh = tape.matmul(rh, p(self.u_h))?;
            let cand = tape.add(xh_t, hh)?;
            let cand = tape.tanh(cand);

            // (1 − z)⊙h + z⊙h̃ == h + z⊙(h̃ − h)
            let diff = tape.sub(cand, h)?;
            let step = tape.mul(z, diff)?;
            h = tape.add(h, step)?;
            states.push(h);
        }
        tape.concat_rows(&states)
    }
}

/// Bidirectional GRU: forward and backward cells of hidden size `d / 2`,
/// outputs concatenated `[forward ‖ backward]` per clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiGruLayer {
    pub forward_cell: GruCell,
    pub backward_cell: GruCell,
}

impl BiGruLayer {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        d: usize,
        rng: &mut SplitRng,
    ) -> Result<Self> {
        if d % 2 != 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "bidirectional GRU needs an even, positive width, got {d}"
            )));
        }
        let forward_cell = GruCell::new(store, &format!("{name}.fwd"), d, d / 2, rng)?;
        let backward_cell = GruCell::new(store, &format!("{name}.bwd"), d, d / 2, rng)?;
        Ok(Self {
            forward_cell,
            backward_cell,
        })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        let (_, d) = tape.value(x).dims2()?;
        if d % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "bidirectional GRU needs an even width, got {d}"
            )));
        }
        let fwd = self.forward_cell.forward(tape, params, x)?;
        let rev = tape.reverse_rows(x)?;
        let bwd = self.backward_cell.forward(tape, params, rev)?;
        let bwd = tape.reverse_rows(bwd)?;
        tape.concat_cols(fwd, bwd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::activation::sigmoid;
    use crate::numerics::{grad_check, normal_tensor};

    fn setup(d: usize, seed: u64) -> (ParamStore<f64>, BiGruLayer) {
        let mut store = ParamStore::new();
        let l = BiGruLayer::new(&mut store, "gru", d, &mut SplitRng::new(seed)).unwrap();
        (store, l)
    }

    fn run(store: &ParamStore<f64>, l: &BiGruLayer, x: Tensor<f64>) -> Tensor<f64> {
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.constant(x);
        let y = l.forward(&mut tape, &p, x).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let (mut store, l) = setup(4, 0);
        for id in store.ids().collect::<Vec<_>>() {
            let shape = store.get(id).shape().to_vec();
            store.set(id, Tensor::zeros(&shape)).unwrap();
        }
        let x = normal_tensor(&[5, 4], &mut SplitRng::new(1)).unwrap();
        assert!(run(&store, &l, x).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_by_hand() {
        // d = 2, hidden = 1 per direction.
        let (mut store, l) = setup(2, 0);
        let x = [0.7, -0.4];
        let set = |store: &mut ParamStore<f64>, id, v: &[f64]| {
            let shape = store.get(id).shape().to_vec();
            store.set(id, Tensor::new(&shape, v.to_vec()).unwrap()).unwrap();
        };
        let wz = [0.3, -0.2];
        let wh = [0.5, 0.9];
        for cell in [l.forward_cell, l.backward_cell] {
            set(&mut store, cell.w_z, &wz);
            set(&mut store, cell.w_h, &wh);
        }
        let y = run(&store, &l, Tensor::from_rows(&[x.to_vec()]).unwrap());
        let z = sigmoid(x[0] * wz[0] + x[1] * wz[1]);
        let cand = (x[0] * wh[0] + x[1] * wh[1]).tanh();
        assert!((y.data()[0] - z * cand).abs() < 1e-15);
        assert!((y.data()[1] - z * cand).abs() < 1e-15);
    }

    #[test]
    fn reversing_input_swaps_and_reverses_halves() {
        let (mut store, l) = setup(6, 3);
        // Share weights across directions so the symmetry is exact.
        let f = l.forward_cell;
        let b = l.backward_cell;
        for (src, dst) in [
            (f.w_z, b.w_z),
            (f.w_r, b.w_r),
            (f.w_h, b.w_h),
            (f.u_z, b.u_z),
            (f.u_r, b.u_r),
            (f.u_h, b.u_h),
            (f.b_z, b.b_z),
            (f.b_r, b.b_r),
            (f.b_h, b.b_h),
        ] {
            let t = store.get(src).clone();
            store.set(dst, t).unwrap();
        }
        let m = 5;
        let x = normal_tensor(&[m, 6], &mut SplitRng::new(8)).unwrap();
        let mut xr = Vec::new();
        for t in (0..m).rev() {
            xr.extend_from_slice(x.row(t));
        }
        let xr = Tensor::new(&[m, 6], xr).unwrap();
        let y = run(&store, &l, x);
        let yr = run(&store, &l, xr);
        for t in 0..m {
            let a = y.row(t);
            let b = yr.row(m - 1 - t);
            assert_eq!(&a[..3], &b[3..]);
            assert_eq!(&a[3..], &b[..3]);
        }
    }

    #[test]
    fn output_shape_and_odd_width() {
        let (store, l) = setup(4, 0);
        for m in [1, 3, 9] {
            assert_eq!(run(&store, &l, Tensor::full(&[m, 4], 0.2)).shape(), &[m, 4]);
        }
        let mut s = ParamStore::<f64>::new();
        assert!(BiGruLayer::new(&mut s, "g", 5, &mut SplitRng::new(0)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (store, l) = setup(4, 5);
        let x = normal_tensor(&[4, 4], &mut SplitRng::new(6)).unwrap();
        let target = normal_tensor(&[4, 4], &mut SplitRng::new(7)).unwrap();
        let loss = |tape: &mut Tape<f64>, p: &Bound, x: Var| -> Result<Var> {
            let y = l.forward(tape, p, x)?;
            let t = tape.constant(target.clone());
            let y = tape.mul(y, t)?;
            Ok(tape.sum(y))
        };
        let err = grad_check(
            |tape, xv| {
                let p = store.bind(tape);
                loss(tape, &p, xv)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "input {err}");
        for id in store.ids() {
            let err = grad_check(
                |tape, w| {
                    let mut p = store.bind(tape);
                    p.0[id.index()] = w;
                    let xv = tape.constant(x.clone());
                    loss(tape, &p, xv)
                },
                store.get(id),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "{}: {err}", store.name(id));
        }
    }
}
