//! The order-by-order engine.
//!
//! The quintic term at order `m` is `Q_m = sum S_a * U_b`, with `S_m = sum P_a * P_b` and
//! `P_m = sum U_a * conj(U_b)`; all sums run over `a + b = m` and every product is cached.
//!
//! Counterterms at modes with `c_j = 0` are needed by the range equation. They are obtained
//! as removable-singularity limits: the mode is added with the infinitesimal amplitude
//! `delta`, and the coefficient of `delta` in the kernel projection gives the value.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::marker::PhantomData;

use super::series::{conj_reflect, convolve_into, Series};
use super::{AmplitudeConfig, CoefficientTable, CountertermTable, EngineSettings};
use crate::error::{Error, Result};
use crate::exec::{chunk_count, chunk_ranges, Exec};
use crate::frequency::FrequencyVector;
use crate::momentum::{ModeIndex, SparseMomentum};
use crate::scalar::{modulus_f64, Coeff, Cx, Real, Tagged};

type MSeries<C> = Series<SparseMomentum, C>;

/// Frequencies cached on their window.
#[derive(Clone, Debug)]
pub(crate) struct OmegaTable<R: Real> {
    window: i64,
    values: Vec<R>,
}

impl<R: Real> OmegaTable<R> {
    pub(crate) fn new(omega: &FrequencyVector<R>) -> Result<Self> {
        let values = (-omega.window..=omega.window).map(|j| omega.omega(j)).collect::<Result<Vec<R>>>()?;
        Ok(Self { window: omega.window, values })
    }

    pub(crate) fn get(&self, j: ModeIndex) -> Result<&R> {
        if j.abs() > self.window {
            return Err(Error::Window { j, window: self.window });
        }
        Ok(&self.values[(j + self.window) as usize])
    }

    /// `omega . nu - omega_{pi(nu)}`.
    pub(crate) fn divisor(&self, nu: &SparseMomentum) -> Result<R> {
        let mut acc = R::zero();
        for &(i, c) in nu.entries() {
            acc = acc + self.get(i)?.clone() * R::from_int(c);
        }
        Ok(acc - self.get(nu.pi())?.clone())
    }
}

/// Series and product caches of one run over the coefficient ring `C`.
pub(crate) struct Run<R: Real, C: Coeff<R>> {
    pub(crate) u: Vec<MSeries<C>>,
    ubar: Vec<MSeries<C>>,
    p: Vec<MSeries<C>>,
    s: Vec<MSeries<C>>,
    exec: Exec,
    _ring: PhantomData<R>,
}

impl<R: Real, C: Coeff<R>> Run<R, C> {
    pub(crate) fn new(order0: impl IntoIterator<Item = (ModeIndex, C)>, exec: Exec) -> Self {
        let u0: MSeries<C> = order0.into_iter().map(|(j, c)| (SparseMomentum::basis(j), c)).collect();
        let ubar0 = conj_reflect(&u0);
        Self { u: vec![u0], ubar: vec![ubar0], p: Vec::new(), s: Vec::new(), exec, _ring: PhantomData }
    }

    fn publish(&mut self, series: MSeries<C>) {
        self.ubar.push(conj_reflect(&series));
        self.u.push(series);
    }

    fn ensure_p(&mut self, m: usize) {
        while self.p.len() <= m {
            let n = self.p.len();
            let mut acc = Series::new();
            for a in 0..=n {
                convolve_into(&mut acc, &self.u[a], &self.ubar[n - a], self.exec);
            }
            self.p.push(acc);
        }
    }

    fn ensure_s(&mut self, m: usize) {
        self.ensure_p(m);
        while self.s.len() <= m {
            let n = self.s.len();
            let mut acc = Series::new();
            for a in 0..=n {
                convolve_into(&mut acc, &self.p[a], &self.p[n - a], self.exec);
            }
            self.s.push(acc);
        }
    }

    /// `Q_m` on all reachable keys.
    pub(crate) fn full_q(&mut self, m: usize) -> MSeries<C> {
        self.ensure_s(m);
        let mut acc = Series::new();
        for a in 0..=m {
            convolve_into(&mut acc, &self.s[a], &self.u[m - a], self.exec);
        }
        acc
    }

    /// `Q_m` at a single key, without forming the full series.
    pub(crate) fn targeted_q(&mut self, m: usize, target: &SparseMomentum) -> C {
        self.ensure_p(m);
        let mut total = C::zero();
        for a in 0..=m {
            for b in 0..=(m - a) {
                let c = m - a - b;
                let left = self.p[a].sorted();
                let right = self.u[c].sorted();
                let pb = &self.p[b];
                let chunks = chunk_ranges(left.len(), chunk_count(left.len() * right.len() / 64));
                let partials = self.exec.map(&chunks, |range| {
                    let mut acc = C::zero();
                    for (x, px) in &left[range.clone()] {
                        let rest = target.sub(x);
                        for (z, uz) in &right {
                            if let Some(v) = pb.get(&rest.sub(z)) {
                                acc.add_assign_ref(&v.mul_ref(px).mul_ref(uz));
                            }
                        }
                    }
                    acc
                });
                for part in partials {
                    total.add_assign_ref(&part);
                }
            }
        }
        total
    }

    /// Pairs `(k1, pi(nu))` read by the range equation at order `k`.
    pub(crate) fn needed_eta(&self, k: usize) -> BTreeSet<(usize, ModeIndex)> {
        let mut out = BTreeSet::new();
        for k1 in 1..k {
            for nu in self.u[k - k1].map.keys() {
                out.insert((k1, nu.pi()));
            }
        }
        out
    }

    /// Solves the range equation at order `k` and publishes `U_k`.
    pub(crate) fn solve_range(
        &mut self,
        k: usize,
        q: &MSeries<C>,
        eta: &HashMap<(usize, ModeIndex), R>,
        omega: &OmegaTable<R>,
        divisor_floor: f64,
    ) -> Result<()> {
        debug_assert_eq!(self.u.len(), k);
        let mut keys: BTreeSet<SparseMomentum> = q.map.keys().cloned().collect();
        for k1 in 1..k {
            keys.extend(self.u[k - k1].map.keys().cloned());
        }
        let keys: Vec<SparseMomentum> = keys.into_iter().filter(|nu| !nu.is_basis(nu.pi())).collect();
        let lower = &self.u;
        let solved = self.exec.map(&keys, |nu| -> Result<(SparseMomentum, C)> {
            let j = nu.pi();
            let mut num = q.get(nu).cloned().unwrap_or_else(C::zero);
            for k1 in 1..k {
                if let Some(v) = lower[k - k1].get(nu) {
                    let e = eta.get(&(k1, j)).ok_or_else(|| {
                        Error::Precondition(format!("counterterm at order {k1}, mode {j} unavailable"))
                    })?;
                    num.add_assign_ref(&v.scale(e));
                }
            }
            let d = omega.divisor(nu)?;
            let too_small = if R::EXACT { d.is_zero() } else { d.to_f64().abs() < divisor_floor };
            if too_small {
                return Err(Error::DivisorTooSmall { j, nu: Box::new(nu.clone()), value: d.to_f64(), floor: divisor_floor });
            }
            Ok((nu.clone(), num.div_real(&d)))
        });
        let series = solved.into_iter().collect::<Result<MSeries<C>>>()?;
        self.publish(series);
        Ok(())
    }
}

/// Where counterterms come from.
#[derive(Clone, Debug, PartialEq)]
pub enum EtaSource<R: Real> {
    /// Solve the kernel equation order by order.
    Solved,
    /// Use the given values; the kernel equation is not imposed.
    Fixed(CountertermTable<R>),
}

struct Context<'a, R: Real> {
    amplitudes: &'a AmplitudeConfig<R>,
    omega: &'a OmegaTable<R>,
    settings: &'a EngineSettings,
    fixed: bool,
}

impl<R: Real> Context<'_, R> {
    fn ensure(&self, store: &mut CountertermTable<R>, k: usize, j: ModeIndex) -> Result<R> {
        if let Some(v) = store.get(k, j) {
            return Ok(v.clone());
        }
        if self.fixed {
            return Err(Error::Precondition(format!("counterterm at order {k}, mode {j} missing from the supplied table")));
        }
        if self.amplitudes.contains(j) {
            return Err(Error::Precondition(format!("counterterm at order {k}, mode {j} requested before it was solved")));
        }
        let v = self.extension(store, k, j)?;
        store.insert(k, j, v.clone(), true);
        Ok(v)
    }

    fn lookup(&self, store: &mut CountertermTable<R>, needed: &BTreeSet<(usize, ModeIndex)>) -> Result<HashMap<(usize, ModeIndex), R>> {
        needed.iter().map(|&(k, j)| Ok(((k, j), self.ensure(store, k, j)?))).collect()
    }

    /// Limit of `-Q_{k-1}(e_j) / c_j` as `c_j -> 0`.
    fn extension(&self, store: &mut CountertermTable<R>, k: usize, j: ModeIndex) -> Result<R> {
        let order0 = self
            .amplitudes
            .amplitudes()
            .iter()
            .map(|(i, c)| (*i, Tagged::constant(c.clone())))
            .chain(std::iter::once((j, Tagged::delta())));
        let mut run: Run<R, Tagged<R>> = Run::new(order0, self.settings.exec);
        for kk in 1..k {
            let q = run.full_q(kk - 1);
            let lookup = self.lookup(store, &run.needed_eta(kk))?;
            run.solve_range(kk, &q, &lookup, self.omega, self.settings.divisor_floor)?;
        }
        let t = run.targeted_q(k - 1, &SparseMomentum::basis(j));
        Ok(-t.d.re)
    }
}

/// The engine state: series, product caches and counterterms through the completed order.
pub struct Engine<R: Real> {
    amplitudes: AmplitudeConfig<R>,
    omega: OmegaTable<R>,
    settings: EngineSettings,
    fixed: bool,
    run: Run<R, Cx<R>>,
    store: CountertermTable<R>,
    completed: usize,
    max_eta_imag: f64,
}

impl<R: Real> Engine<R> {
    /// Prepares order zero; call [`Engine::step`] to advance.
    pub fn new(
        amplitudes: &AmplitudeConfig<R>,
        omega: &FrequencyVector<R>,
        settings: EngineSettings,
        source: EtaSource<R>,
    ) -> Result<Self> {
        if settings.order > settings.order_cap {
            return Err(Error::OrderCap { order: settings.order, cap: settings.order_cap });
        }
        let (fixed, store) = match source {
            EtaSource::Solved => (false, CountertermTable::default()),
            EtaSource::Fixed(t) => (true, t),
        };
        let run = Run::new(amplitudes.amplitudes().iter().map(|(j, c)| (*j, c.clone())), settings.exec);
        Ok(Self {
            amplitudes: amplitudes.clone(),
            omega: OmegaTable::new(omega)?,
            settings,
            fixed,
            run,
            store,
            completed: 0,
            max_eta_imag: 0.0,
        })
    }

    /// Runs through `settings.order` with solved counterterms.
    pub fn run(amplitudes: &AmplitudeConfig<R>, omega: &FrequencyVector<R>, settings: EngineSettings) -> Result<Self> {
        Self::run_with(amplitudes, omega, settings, EtaSource::Solved)
    }

    pub fn run_with(
        amplitudes: &AmplitudeConfig<R>,
        omega: &FrequencyVector<R>,
        settings: EngineSettings,
        source: EtaSource<R>,
    ) -> Result<Self> {
        let mut e = Self::new(amplitudes, omega, settings, source)?;
        while e.completed < settings.order {
            e.step()?;
        }
        Ok(e)
    }

    /// Computes `eta^(k)` on the support, then `u^(k)`.
    pub fn step(&mut self) -> Result<()> {
        let k = self.completed + 1;
        if k > self.settings.order_cap {
            return Err(Error::OrderCap { order: k, cap: self.settings.order_cap });
        }
        let q = self.run.full_q(k - 1);
        if !self.fixed {
            for (j, c) in self.amplitudes.amplitudes() {
                if !R::EXACT && modulus_f64(c) < self.settings.conditioning_floor {
                    return Err(Error::Conditioning { j: *j, modulus: modulus_f64(c), floor: self.settings.conditioning_floor });
                }
                let qe = q.get(&SparseMomentum::basis(*j)).cloned().unwrap_or_else(Coeff::<R>::zero);
                let eta = -(qe / c.clone());
                self.max_eta_imag = self.max_eta_imag.max(eta.im.to_f64().abs());
                self.store.insert(k, *j, eta.re, false);
            }
        }
        let needed = self.run.needed_eta(k);
        let Self { amplitudes, omega, settings, fixed, store, run, .. } = self;
        let ctx = Context { amplitudes, omega, settings, fixed: *fixed };
        let lookup = ctx.lookup(store, &needed)?;
        run.solve_range(k, &q, &lookup, omega, settings.divisor_floor)?;
        self.completed = k;
        Ok(())
    }

    pub fn completed_order(&self) -> usize {
        self.completed
    }

    pub fn amplitudes(&self) -> &AmplitudeConfig<R> {
        &self.amplitudes
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    /// Largest imaginary part met when dividing by `c_j`; zero in exact mode.
    pub fn max_eta_imag(&self) -> f64 {
        self.max_eta_imag
    }

    pub fn coefficients(&self) -> CoefficientTable<R> {
        CoefficientTable {
            orders: self.run.u.iter().map(|s| s.sorted().into_iter().map(|(k, v)| (k.clone(), v.clone())).collect()).collect(),
        }
    }

    pub fn counterterms(&self) -> &CountertermTable<R> {
        &self.store
    }

    /// `eta^(k)_j`, extending off the support when needed.
    pub fn eta(&mut self, k: usize, j: ModeIndex) -> Result<R> {
        let Self { amplitudes, omega, settings, fixed, store, .. } = self;
        Context { amplitudes, omega, settings, fixed: *fixed }.ensure(store, k, j)
    }

    /// Fills every counterterm read by the equation at orders `<= through`.
    pub fn complete_counterterms(&mut self, through: usize) -> Result<()> {
        let mut needed = BTreeSet::new();
        for (k2, series) in self.run.u.iter().enumerate().skip(1) {
            for nu in series.map.keys() {
                for k1 in 1..=through.saturating_sub(k2) {
                    needed.insert((k1, nu.pi()));
                }
            }
        }
        for (k1, j) in needed {
            if k1 <= self.completed {
                self.eta(k1, j)?;
            }
        }
        Ok(())
    }

    /// `Q_m(e_j)`, the kernel projection of the quintic term.
    pub fn kernel_projection(&mut self, m: usize, j: ModeIndex) -> Result<Cx<R>> {
        if m > self.completed {
            return Err(Error::Precondition(format!("kernel projection at order {m} needs the run through order {m}")));
        }
        Ok(self.run.targeted_q(m, &SparseMomentum::basis(j)))
    }

    /// `Q_m` on every reachable key.
    pub fn quintic_term(&mut self, m: usize) -> Result<BTreeMap<SparseMomentum, Cx<R>>> {
        if m > self.completed {
            return Err(Error::Precondition(format!("quintic term at order {m} needs the run through order {m}")));
        }
        Ok(self.run.full_q(m).sorted().into_iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }
}

/// `eta^(1)_j` at the given modes without forming the full quintic series.
pub fn first_order_counterterms<R: Real>(
    amplitudes: &AmplitudeConfig<R>,
    targets: &[ModeIndex],
    exec: Exec,
) -> Result<BTreeMap<ModeIndex, R>> {
    let mut main: Run<R, Cx<R>> = Run::new(amplitudes.amplitudes().iter().map(|(j, c)| (*j, c.clone())), exec);
    let mut out = BTreeMap::new();
    for &j in targets {
        let target = SparseMomentum::basis(j);
        let value = match amplitudes.get(j) {
            Some(c) => {
                let q = main.targeted_q(0, &target);
                -(q / c.clone()).re
            }
            None => {
                let order0 = amplitudes
                    .amplitudes()
                    .iter()
                    .map(|(i, c)| (*i, Tagged::constant(c.clone())))
                    .chain(std::iter::once((j, Tagged::delta())));
                let mut run: Run<R, Tagged<R>> = Run::new(order0, exec);
                -run.targeted_q(0, &target).d.re
            }
        };
        out.insert(j, value);
    }
    Ok(out)
}
