//! Python bindings: `import dmdt`.

use dmdt_core::exponent::{self, ExponentSolution, FiniteSnrSolution};
use dmdt_core::lp::{self, CscMatrix, LpProblem, LpStatus};
use dmdt_core::mdp::{
    build_mdp, evaluate_policy, policy_report, solve_mdp, ArqConfig, MdpModel, Policy, PolicyReport,
};
use dmdt_core::sim::{self, SimConfig, SimReport};
use dmdt_core::video::{self, CodeErrorTable, RateDistortion, VideoSourceModel};
use dmdt_core::{ChannelConfig, SourceConfig, TradeoffCurve};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: dmdt_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else if matches!(e, dmdt_core::Error::Io(_)) {
        PyIOError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for dmdt_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

#[pyclass(name = "Channel", frozen, get_all)]
struct PyChannel {
    tx_antennas: u32,
    rx_antennas: u32,
    block_length: u32,
    snr_db: f64,
}

impl PyChannel {
    fn config(&self) -> ChannelConfig {
        ChannelConfig {
            tx_antennas: self.tx_antennas,
            rx_antennas: self.rx_antennas,
            block_length: self.block_length,
            snr_db: self.snr_db,
        }
    }
}

#[pymethods]
impl PyChannel {
    #[new]
    #[pyo3(signature = (tx_antennas, rx_antennas, block_length = 1, snr_db = 10.0))]
    fn new(tx_antennas: u32, rx_antennas: u32, block_length: u32, snr_db: f64) -> PyResult<Self> {
        let c = ChannelConfig::new(tx_antennas, rx_antennas, block_length, snr_db).py_err()?;
        Ok(PyChannel {
            tx_antennas: c.tx_antennas,
            rx_antennas: c.rx_antennas,
            block_length: c.block_length,
            snr_db: c.snr_db,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel({}, {}, block_length={}, snr_db={})",
            self.tx_antennas, self.rx_antennas, self.block_length, self.snr_db
        )
    }
}

#[pyclass(name = "Source", frozen, get_all)]
struct PySource {
    norm_order: f64,
    source_dim: f64,
}

impl PySource {
    fn config(&self) -> SourceConfig {
        SourceConfig {
            norm_order: self.norm_order,
            source_dim: self.source_dim,
        }
    }
}

#[pymethods]
impl PySource {
    #[new]
    #[pyo3(signature = (norm_order = 2.0, source_dim = 2.0))]
    fn new(norm_order: f64, source_dim: f64) -> PyResult<Self> {
        SourceConfig::new(norm_order, source_dim).py_err()?;
        Ok(PySource { norm_order, source_dim })
    }

    fn __repr__(&self) -> String {
        format!("Source(norm_order={}, source_dim={})", self.norm_order, self.source_dim)
    }
}

/// The tradeoff curve `d*(r)`, or `d*(r/L)` for an ARQ window `L`.
#[pyclass(name = "Tradeoff", frozen)]
struct PyTradeoff {
    curve: TradeoffCurve,
}

#[pymethods]
impl PyTradeoff {
    #[new]
    #[pyo3(signature = (tx_antennas, rx_antennas, window = 1))]
    fn new(tx_antennas: u32, rx_antennas: u32, window: u32) -> PyResult<Self> {
        let curve = TradeoffCurve::from_antennas(tx_antennas, rx_antennas)
            .and_then(|c| c.with_arq_window(window))
            .py_err()?;
        Ok(PyTradeoff { curve })
    }

    fn eval(&self, r: f64) -> PyResult<f64> {
        self.curve.eval(r).py_err()
    }

    /// Corner points `(r, d)` of the single-round curve.
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.curve.vertices().to_vec()
    }

    #[getter]
    fn window(&self) -> u32 {
        self.curve.arq_window()
    }

    #[getter]
    fn max_rate(&self) -> f64 {
        self.curve.max_rate()
    }

    #[getter]
    fn full_diversity(&self) -> f64 {
        self.curve.full_diversity()
    }
}

fn exponent_dict<'py>(py: Python<'py>, s: &ExponentSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("r_star", s.r_star)?;
    d.set_item("d_star", s.d_star)?;
    d.set_item("distortion_exponent", s.distortion_exponent)?;
    d.set_item("segment", s.segment_index)?;
    Ok(d)
}

fn finite_dict<'py>(py: Python<'py>, s: &FiniteSnrSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("r_star", s.r_star)?;
    d.set_item("objective", s.objective)?;
    d.set_item("source_term", s.source_term)?;
    d.set_item("channel_term", s.channel_term)?;
    Ok(d)
}

#[pyfunction]
fn solve_high_snr<'py>(py: Python<'py>, channel: &PyChannel, source: &PySource) -> PyResult<Bound<'py, PyDict>> {
    let chan = channel.config();
    let curve = TradeoffCurve::new(&chan).py_err()?;
    exponent_dict(py, &exponent::solve_high_snr(&curve, &source.config(), &chan).py_err()?)
}

#[pyfunction]
fn solve_finite_snr<'py>(py: Python<'py>, channel: &PyChannel, source: &PySource) -> PyResult<Bound<'py, PyDict>> {
    let chan = channel.config();
    let curve = TradeoffCurve::new(&chan).py_err()?;
    finite_dict(py, &exponent::solve_finite_snr(&curve, &source.config(), &chan).py_err()?)
}

/// `(D_s, D_c)` at multiplexing gain `r`.
#[pyfunction]
fn distortion_terms(r: f64, channel: &PyChannel, source: &PySource) -> PyResult<(f64, f64)> {
    let chan = channel.config();
    let curve = TradeoffCurve::new(&chan).py_err()?;
    exponent::distortion_terms(r, &curve, &source.config(), &chan).py_err()
}

/// Picks the number of multiplexing antennas minimizing the total distortion.
///
/// `pe_points` holds `(n_u, snr_db, p_e)` rows, `rates` maps `n_u` to the
/// code rate, and the rate-distortion curve is either the `rd_points` table
/// or the hyperbolic model `rd_model = (d0, theta, r0)`.
#[pyfunction]
#[pyo3(signature = (pe_points, rates, snr_db, beta, gamma, sigma2, rd_points = None, rd_model = None))]
#[allow(clippy::too_many_arguments)]
fn optimize_antennas<'py>(
    py: Python<'py>,
    pe_points: Vec<(u32, f64, f64)>,
    rates: Vec<(u32, f64)>,
    snr_db: f64,
    beta: f64,
    gamma: f64,
    sigma2: f64,
    rd_points: Option<Vec<(f64, f64)>>,
    rd_model: Option<(f64, f64, f64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let rate_distortion = match (rd_points, rd_model) {
        (Some(p), None) => RateDistortion::table(p),
        (None, Some((d0, theta, r0))) => RateDistortion::hyperbolic(d0, theta, r0),
        _ => return Err(PyValueError::new_err("give exactly one of rd_points and rd_model")),
    }
    .py_err()?;
    let model = VideoSourceModel {
        beta,
        gamma,
        sigma2,
        rate_distortion,
    };
    let table = CodeErrorTable::from_points(pe_points).py_err()?;
    let rate_of = |nu: u32| rates.iter().find(|r| r.0 == nu).map(|r| r.1);
    let sol = video::optimize_antennas(&model, &table, snr_db, rate_of).py_err()?;
    let d = PyDict::new(py);
    d.set_item("n_u", sol.best.n_u)?;
    d.set_item("total", sol.best.total)?;
    let cands: Vec<(u32, f64, f64, f64, f64)> = sol
        .candidates
        .iter()
        .map(|c| (c.n_u, c.rate, c.source_distortion, c.channel_distortion, c.total))
        .collect();
    d.set_item("candidates", cands)?;
    Ok(d)
}

/// Solves `min c^T x` subject to `A x = b`, `x >= 0` with dense `A`.
#[pyfunction]
fn solve_lp<'py>(py: Python<'py>, c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let p = LpProblem::new(c, CscMatrix::from_dense(&a).py_err()?, b).py_err()?;
    let sol = lp::solve(&p).py_err()?;
    let d = PyDict::new(py);
    let status = match sol.status {
        LpStatus::Optimal => "optimal",
        LpStatus::Infeasible => "infeasible",
        LpStatus::Unbounded => "unbounded",
    };
    d.set_item("status", status)?;
    d.set_item("objective", sol.objective_value)?;
    d.set_item("iterations", sol.iteration_count)?;
    d.set_item("primal_residual", sol.primal_residual(&p))?;
    d.set_item("duality_gap", sol.duality_gap(&p))?;
    d.set_item("x", sol.x)?;
    d.set_item("duals", sol.duals)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &PolicyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("avg_reward_per_block", r.avg_reward_per_block)?;
    d.set_item("per_message_distortion", r.per_message_distortion)?;
    d.set_item("delivery_rate", r.delivery_rate)?;
    d.set_item("deadline_violation_rate", r.deadline_violation_rate)?;
    d.set_item("arq_failure_rate", r.arq_failure_rate)?;
    d.set_item("throughput_eta", r.throughput_eta)?;
    Ok(d)
}

fn sim_dict<'py>(py: Python<'py>, r: &SimReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in SimReport::CSV_HEADER.iter().zip(r.csv_record()) {
        d.set_item(*k, v.parse::<f64>().unwrap_or(f64::NAN))?;
    }
    d.set_item("blocks", r.blocks)?;
    Ok(d)
}

/// The delay-constrained MIMO-ARQ MDP for one deadline.
#[pyclass(name = "ArqMdp", frozen)]
struct PyArqMdp {
    mdp: MdpModel,
    optimal: Policy,
    objective: f64,
    primal_residual: f64,
    duality_gap: f64,
    iterations: usize,
}

impl PyArqMdp {
    fn policy(&self, fixed: Option<(f64, u32)>) -> PyResult<Policy> {
        match fixed {
            None => Ok(self.optimal.clone()),
            Some((r, window)) => {
                let rate = self
                    .mdp
                    .arq_config()
                    .and_then(|c| c.allowed_r.iter().position(|&x| x == r))
                    .ok_or_else(|| PyValueError::new_err(format!("rate {r} is not allowed")))?;
                Policy::fixed(&self.mdp, rate, window).py_err()
            }
        }
    }
}

#[pymethods]
impl PyArqMdp {
    /// Builds the model and solves its LP.
    #[new]
    #[pyo3(signature = (channel, source, deadline, arrival_prob = 0.9, max_window = 4, allowed_r = None))]
    fn new(
        channel: &PyChannel,
        source: &PySource,
        deadline: u32,
        arrival_prob: f64,
        max_window: u32,
        allowed_r: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let mut cfg = ArqConfig::new(deadline);
        cfg.arrival_prob = arrival_prob;
        cfg.max_window = max_window;
        if let Some(r) = allowed_r {
            cfg.allowed_r = r;
        }
        let mdp = build_mdp(&cfg, &channel.config(), &source.config()).py_err()?;
        let sol = solve_mdp(&mdp).py_err()?;
        Ok(PyArqMdp {
            optimal: sol.policy,
            objective: sol.objective,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
            iterations: sol.lp.iteration_count,
            mdp,
        })
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    #[getter]
    fn num_state_actions(&self) -> usize {
        self.mdp.num_state_actions()
    }

    /// LP optimum: average distortion per round.
    #[getter]
    fn objective(&self) -> f64 {
        self.objective
    }

    fn lp_certificate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("primal_residual", self.primal_residual)?;
        d.set_item("duality_gap", self.duality_gap)?;
        d.set_item("iterations", self.iterations)?;
        Ok(d)
    }

    /// Optimal `(r, L)` when the queue holds messages of the given ages, or
    /// `None` mid-block.
    fn decision(&self, ages: Vec<u32>) -> PyResult<Option<(f64, u32)>> {
        self.optimal.decision_at(&self.mdp, &ages).py_err()
    }

    /// Exact average reward of the optimal policy, or of a fixed `(r, L)`.
    #[pyo3(signature = (fixed = None))]
    fn evaluate(&self, fixed: Option<(f64, u32)>) -> PyResult<f64> {
        evaluate_policy(&self.mdp, &self.policy(fixed)?).py_err()
    }

    #[pyo3(signature = (fixed = None))]
    fn report<'py>(&self, py: Python<'py>, fixed: Option<(f64, u32)>) -> PyResult<Bound<'py, PyDict>> {
        report_dict(py, &policy_report(&self.mdp, &self.policy(fixed)?).py_err()?)
    }

    /// The optimal policy in the CLI's policy CSV layout.
    fn policy_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        self.optimal.write_csv(&self.mdp, &mut out).py_err()?;
        String::from_utf8(out).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[pyo3(signature = (horizon_blocks = 1_000_000, warmup_blocks = 10_000, seed = 0, fixed = None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        horizon_blocks: u64,
        warmup_blocks: u64,
        seed: u64,
        fixed: Option<(f64, u32)>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let policy = self.policy(fixed)?;
        let cfg = SimConfig::new(horizon_blocks, warmup_blocks, seed);
        let report = py.detach(|| sim::run(&self.mdp, &policy, &cfg)).py_err()?;
        sim_dict(py, &report)
    }
}

#[pymodule]
fn dmdt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_class::<PySource>()?;
    m.add_class::<PyTradeoff>()?;
    m.add_class::<PyArqMdp>()?;
    m.add_function(wrap_pyfunction!(solve_high_snr, m)?)?;
    m.add_function(wrap_pyfunction!(solve_finite_snr, m)?)?;
    m.add_function(wrap_pyfunction!(distortion_terms, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_antennas, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    Ok(())
}
