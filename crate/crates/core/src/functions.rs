//! Piecewise-constant rate functions and piecewise-linear functions of time.
//!
//! Flow rates (edge in/outflows, walk inflows) are right-continuous step
//! functions that vanish outside their support. Cumulative flows, queue
//! lengths and exit times are continuous piecewise-linear functions.

/// Breakpoints closer than this are treated as identical.
pub const TIME_EPS: f64 = 1e-12;

/// Right-continuous piecewise-constant function on `[0, ∞)`.
///
/// Piece `k` covers `[times[k], times[k + 1])` with value `rates[k]`; the
/// function is zero before `times[0]` and from `times[n]` on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepFunction {
    times: Vec<f64>,
    rates: Vec<f64>,
    /// `cumulative[k]` is the integral up to `times[k]`.
    cumulative: Vec<f64>,
}

impl StepFunction {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a step function from `(start, end, rate)` pieces sorted by time.
    /// Gaps between pieces are filled with zero.
    pub fn from_pieces<I>(pieces: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let mut f = Self::new();
        for (start, end, rate) in pieces {
            f.push(start, end, rate);
        }
        f
    }

    /// Constant `rate` on `[start, end)`.
    pub fn constant(start: f64, end: f64, rate: f64) -> Self {
        Self::from_pieces([(start, end, rate)])
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn num_pieces(&self) -> usize {
        self.rates.len()
    }

    /// Appends the piece `[start, end)`; `start` must not precede the current
    /// end of the function (up to [`TIME_EPS`]). Empty pieces are ignored and
    /// equal-valued neighbours are merged.
    pub fn push(&mut self, start: f64, end: f64, rate: f64) {
        if end - start <= 0.0 {
            return;
        }
        match self.times.last().copied() {
            None => {
                self.times.push(start);
                self.times.push(end);
                self.rates.push(rate);
                self.cumulative.push(0.0);
                self.cumulative.push(rate * (end - start));
            }
            Some(last) => {
                debug_assert!(
                    start >= last - TIME_EPS * last.abs().max(1.0),
                    "piece starts at {start} before current end {last}"
                );
                let start = if start < last { last } else { start };
                if start - last > TIME_EPS * last.abs().max(1.0) {
                    self.append_piece(last, start, 0.0);
                }
                self.append_piece(self.end(), end, rate);
            }
        }
    }

    fn append_piece(&mut self, start: f64, end: f64, rate: f64) {
        if end <= start {
            return;
        }
        let n = self.rates.len();
        let base = self.cumulative[n];
        if self.rates[n - 1] == rate {
            *self.times.last_mut().unwrap() = end;
            self.cumulative[n] = self.cumulative[n - 1] + rate * (end - self.times[n - 1]);
        } else {
            self.times.push(end);
            self.rates.push(rate);
            self.cumulative.push(base + rate * (end - start));
        }
    }

    /// First breakpoint, or `0` for the zero function.
    pub fn start(&self) -> f64 {
        self.times.first().copied().unwrap_or(0.0)
    }

    /// Last breakpoint, or `0` for the zero function.
    pub fn end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.times
    }

    /// Iterates over `(start, end, rate)`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.rates
            .iter()
            .enumerate()
            .map(move |(k, &r)| (self.times[k], self.times[k + 1], r))
    }

    /// Index of the piece containing `t`, if any.
    fn piece_at(&self, t: f64) -> Option<usize> {
        if self.rates.is_empty() || t < self.times[0] || t >= self.end() {
            return None;
        }
        // partition_point returns the first index with times[k] > t.
        let k = self.times.partition_point(|&x| x <= t);
        Some(k - 1)
    }

    /// Value at `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        self.piece_at(t).map_or(0.0, |k| self.rates[k])
    }

    /// `∫_0^t f`.
    pub fn integral_to(&self, t: f64) -> f64 {
        if self.rates.is_empty() || t <= self.times[0] {
            return 0.0;
        }
        if t >= self.end() {
            return *self.cumulative.last().unwrap();
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        self.cumulative[k] + self.rates[k] * (t - self.times[k])
    }

    /// `∫_a^b f`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integral_to(b) - self.integral_to(a)
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Largest value attained.
    pub fn sup(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// End of the support: the last time with a non-zero value.
    pub fn support_end(&self) -> f64 {
        self.pieces()
            .filter(|p| p.2 != 0.0)
            .map(|p| p.1)
            .fold(0.0, f64::max)
    }

    /// Breakpoints strictly inside `(a, b)`, starting the search at `*cursor`.
    ///
    /// The cursor only moves forward, so repeated calls with increasing
    /// windows are linear overall.
    pub(crate) fn breakpoints_in(&self, a: f64, b: f64, cursor: &mut usize, out: &mut Vec<f64>) {
        while *cursor < self.times.len() && self.times[*cursor] <= a {
            *cursor += 1;
        }
        let mut k = *cursor;
        while k < self.times.len() && self.times[k] < b {
            out.push(self.times[k]);
            k += 1;
        }
    }

    /// The cumulative function `t ↦ ∫_0^t f` as a piecewise-linear function.
    pub fn cumulative(&self) -> PiecewiseLinearFn {
        let mut points = Vec::with_capacity(self.times.len() + 1);
        if !self.times.is_empty() {
            if self.times[0] > 0.0 {
                points.push((0.0, 0.0));
            }
            for (t, c) in self.times.iter().zip(&self.cumulative) {
                points.push((*t, *c));
            }
        } else {
            points.push((0.0, 0.0));
        }
        PiecewiseLinearFn::from_points(points)
    }
}

/// Continuous piecewise-linear function given by breakpoints, extended as a
/// constant beyond the first and last breakpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PiecewiseLinearFn {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinearFn {
    /// Points must have non-decreasing abscissae.
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].0 <= w[1].0));
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends a point; a point at the same abscissa as the last one
    /// overwrites it.
    pub fn push(&mut self, t: f64, y: f64) {
        if let Some(last) = self.points.last_mut() {
            if (t - last.0).abs() <= TIME_EPS * t.abs().max(1.0) {
                last.1 = y;
                return;
            }
            debug_assert!(t > last.0);
        }
        self.points.push((t, y));
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        match pts.len() {
            0 => 0.0,
            _ if t <= pts[0].0 => pts[0].1,
            n if t >= pts[n - 1].0 => pts[n - 1].1,
            _ => {
                let k = pts.partition_point(|p| p.0 <= t);
                let (t0, y0) = pts[k - 1];
                let (t1, y1) = pts[k];
                if t1 == t0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    pub fn last_point(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }

    /// Slopes of the linear pieces (pieces of zero length are skipped).
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points
            .windows(2)
            .filter(|w| w[1].0 > w[0].0)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
    }

    pub fn is_non_decreasing(&self, tol: f64) -> bool {
        self.points.windows(2).all(|w| w[1].1 >= w[0].1 - tol)
    }

    /// Left-continuous generalized inverse `inf { t : f(t) ≥ y }` of a
    /// non-decreasing function. Returns `None` if `y` is never reached.
    pub fn generalized_inverse(&self, y: f64) -> Option<f64> {
        let pts = &self.points;
        let first = *pts.first()?;
        if y <= first.1 {
            return Some(first.0);
        }
        let k = pts.partition_point(|p| p.1 < y);
        if k == pts.len() {
            return None;
        }
        let (t0, y0) = pts[k - 1];
        let (t1, y1) = pts[k];
        if y1 == y0 {
            return Some(t1);
        }
        Some(t0 + (t1 - t0) * (y - y0) / (y1 - y0))
    }
}
