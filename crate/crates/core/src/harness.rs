//! Synchronous round-based network engine.
//!
//! Every cross-node read goes through [`Network::exchange`]: each node
//! publishes one p-vector, the engine delivers it along the edges, and the
//! update closure sees a [`NodeView`] that can only open payloads from
//! neighbors. Messages are counted in a [`MessageLedger`].

use serde::Serialize;

use crate::error::{Error, LocalityViolation, Result};
use crate::linalg::Vector;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoundCount {
    pub vector_msgs: u64,
    pub signal_msgs: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MessageLedger {
    pub rounds: Vec<RoundCount>,
    pub vector_msgs: u64,
    pub signal_msgs: u64,
}

impl MessageLedger {
    fn push(&mut self, count: RoundCount) {
        self.vector_msgs += count.vector_msgs;
        self.signal_msgs += count.signal_msgs;
        self.rounds.push(count);
    }

    pub fn total(&self) -> u64 {
        self.vector_msgs + self.signal_msgs
    }
}

/// What node `id` may see during one round.
pub struct NodeView<'a> {
    id: usize,
    round: usize,
    topology: &'a Topology,
    inbox: &'a [Vector],
}

impl<'a> NodeView<'a> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn neighbors(&self) -> &'a [usize] {
        self.topology.neighbors(self.id)
    }

    pub fn degree(&self) -> usize {
        self.neighbors().len()
    }

    /// The payload this node published itself.
    pub fn own(&self) -> &'a Vector {
        &self.inbox[self.id]
    }

    /// Payload published by node `j`; only legal for neighbors.
    pub fn recv(&self, j: usize) -> std::result::Result<&'a Vector, LocalityViolation> {
        if j == self.id || self.topology.are_adjacent(self.id, j) {
            Ok(&self.inbox[j])
        } else {
            Err(LocalityViolation {
                node: self.id,
                round: self.round,
                accessed: j,
            })
        }
    }

    pub fn received(&self) -> impl Iterator<Item = (usize, &'a Vector)> + 'a {
        let inbox = self.inbox;
        self.neighbors().iter().map(move |&j| (j, &inbox[j]))
    }

    pub fn neighbor_sum(&self) -> Vector {
        self.received()
            .fold(Vector::zeros(self.own().len()), |acc, (_, v)| acc + v)
    }
}

pub struct Network<'t> {
    topology: &'t Topology,
    round: usize,
    ledger: MessageLedger,
    order: Vec<usize>,
}

impl<'t> Network<'t> {
    pub fn new(topology: &'t Topology) -> Self {
        Self {
            topology,
            round: 0,
            ledger: MessageLedger::default(),
            order: (0..topology.n()).collect(),
        }
    }

    /// Executes node updates in `order` within each round. Results must not
    /// depend on it.
    pub fn with_order(mut self, order: Vec<usize>) -> Result<Self> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..self.topology.n()).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument("node order must be a permutation".into()));
        }
        self.order = order;
        Ok(self)
    }

    pub fn topology(&self) -> &'t Topology {
        self.topology
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn rounds(&self) -> usize {
        self.round
    }

    /// One barrier round: node i sends `outbox[i]` to every neighbor, then
    /// `update` runs once per node against what it received.
    pub fn exchange<T>(
        &mut self,
        outbox: &[Vector],
        mut update: impl FnMut(&NodeView<'_>) -> Result<T>,
    ) -> Result<Vec<T>> {
        let n = self.topology.n();
        if outbox.len() != n {
            return Err(Error::Dimension {
                context: "round outbox",
                expected: n,
                actual: outbox.len(),
            });
        }
        self.round += 1;
        self.ledger.push(RoundCount {
            vector_msgs: self.topology.m() as u64,
            signal_msgs: 0,
        });
        let mut results: Vec<Option<T>> = (0..n).map(|_| None).collect();
        for &i in &self.order {
            let view = NodeView {
                id: i,
                round: self.round,
                topology: self.topology,
                inbox: outbox,
            };
            results[i] = Some(update(&view)?);
        }
        Ok(results.into_iter().map(|r| r.expect("every node ran")).collect())
    }

    /// Global one-bit broadcast from each origin; costs `n − 1` scalar
    /// messages per origin. Delivered at the next barrier.
    pub fn broadcast(&mut self, origins: &[usize]) {
        let n = self.topology.n() as u64;
        self.ledger.push(RoundCount {
            vector_msgs: 0,
            signal_msgs: origins.len() as u64 * (n - 1),
        });
    }
}

/// Quantities an observer records after each iteration. Not part of the
/// protocol and not charged to the ledger.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Stacked per-node iterate.
    pub x: Vector,
    pub alpha: Option<f64>,
    pub objective: f64,
    pub grad_norm: Option<f64>,
    /// `‖D_{t-1}^{-1/2} g_t‖`.
    pub weighted_grad_norm_prev_d: Option<f64>,
    /// `‖D_t^{-1/2} g_t‖`.
    pub weighted_grad_norm_cur_d: Option<f64>,
}

pub trait Solver {
    fn name(&self) -> String;
    fn step(&mut self, net: &mut Network<'_>) -> Result<()>;
    fn observe(&self) -> Result<Observation>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
    pub rel_err_tol: Option<f64>,
}

impl StopCriteria {
    pub fn iterations(max_iters: usize) -> Self {
        Self {
            max_iters,
            grad_tol: None,
            rel_err_tol: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 && self.grad_tol.is_none() && self.rel_err_tol.is_none() {
            return Err(Error::InvalidArgument("stop criterion is empty".into()));
        }
        Ok(())
    }
}

/// Ground truth for the derived trace columns.
#[derive(Debug, Clone, Default)]
pub struct TraceReference {
    pub x_star: Option<Vector>,
    pub f_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: usize,
    pub alpha: Option<f64>,
    #[serde(rename = "F")]
    pub objective: f64,
    #[serde(rename = "F_gap")]
    pub f_gap: Option<f64>,
    pub grad_norm: Option<f64>,
    #[serde(rename = "weighted_grad_norm_prev_D")]
    pub weighted_grad_norm_prev_d: Option<f64>,
    #[serde(skip)]
    pub weighted_grad_norm_cur_d: Option<f64>,
    pub rel_err: Option<f64>,
    pub msgs_cum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub solver: String,
    pub records: Vec<TraceRecord>,
    pub final_x: Vector,
    pub ledger: MessageLedger,
}

impl ConvergenceTrace {
    /// Iterations performed; `records[0]` is the starting point.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace holds the initial record")
    }

    /// First iteration whose relative error is at most `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_err.is_some_and(|e| e <= level))
            .map(|r| r.t)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn run(
    solver: &mut dyn Solver,
    net: &mut Network<'_>,
    stop: StopCriteria,
    reference: &TraceReference,
) -> Result<ConvergenceTrace> {
    run_observed(solver, net, stop, reference, |_, _| Ok(()))
}

/// [`run`] with a hook called on the solver after the initial observation
/// (`t = 0`) and after every step.
pub fn run_observed<S: Solver + ?Sized>(
    solver: &mut S,
    net: &mut Network<'_>,
    stop: StopCriteria,
    reference: &TraceReference,
    mut on_step: impl FnMut(usize, &S) -> Result<()>,
) -> Result<ConvergenceTrace> {
    stop.validate()?;
    let first = solver.observe()?;
    let initial_err = reference
        .x_star
        .as_ref()
        .map(|xs| (&first.x - xs).norm());
    let record = |t: usize, obs: &Observation, msgs: u64| TraceRecord {
        t,
        alpha: obs.alpha,
        objective: obs.objective,
        f_gap: reference.f_star.map(|fs| obs.objective - fs),
        grad_norm: obs.grad_norm,
        weighted_grad_norm_prev_d: obs.weighted_grad_norm_prev_d,
        weighted_grad_norm_cur_d: obs.weighted_grad_norm_cur_d,
        rel_err: reference.x_star.as_ref().zip(initial_err).map(|(xs, e0)| {
            let e = (&obs.x - xs).norm();
            if e0 > 0.0 {
                e / e0
            } else {
                e
            }
        }),
        msgs_cum: msgs,
    };
    let mut records = vec![record(0, &first, net.ledger().total())];
    on_step(0, solver)?;
    let mut last_x = first.x;
    let stop_now = |r: &TraceRecord| {
        stop.grad_tol.zip(r.grad_norm).is_some_and(|(tol, g)| g <= tol)
            || stop.rel_err_tol.zip(r.rel_err).is_some_and(|(tol, e)| e <= tol)
    };
    if !stop_now(&records[0]) {
        for t in 1..=stop.max_iters {
            solver.step(net)?;
            on_step(t, solver)?;
            let obs = solver.observe()?;
            let rec = record(t, &obs, net.ledger().total());
            last_x = obs.x;
            let done = stop_now(&rec);
            records.push(rec);
            if done {
                break;
            }
        }
    }
    Ok(ConvergenceTrace {
        solver: solver.name(),
        records,
        final_x: last_x,
        ledger: net.ledger().clone(),
    })
}

/// Result of running a solver under the locality monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub iterations: usize,
    pub violation: Option<LocalityViolation>,
}

impl ProbeReport {
    pub fn is_clean(&self) -> bool {
        self.violation.is_none()
    }
}

/// Runs `iterations` steps and reports the first illegal read, if any.
/// Errors other than locality violations are propagated.
pub fn locality_probe(solver: &mut dyn Solver, net: &mut Network<'_>, iterations: usize) -> Result<ProbeReport> {
    for it in 0..iterations {
        match solver.step(net) {
            Ok(()) => {}
            Err(Error::Locality(v)) => {
                return Ok(ProbeReport {
                    iterations: it,
                    violation: Some(v),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ProbeReport {
        iterations,
        violation: None,
    })
}

/// Deliberately broken gradient step: node i averages its value with the
/// payload of node `(i + offset) mod n`, whether or not that node is a
/// neighbor. Exists to exercise the locality monitor.
pub struct NonNeighborReader {
    pub x: Vec<Vector>,
    pub offset: usize,
}

impl Solver for NonNeighborReader {
    fn name(&self) -> String {
        format!("non-neighbor-reader(+{})", self.offset)
    }

    fn step(&mut self, net: &mut Network<'_>) -> Result<()> {
        let n = self.x.len();
        let offset = self.offset;
        self.x = net.exchange(&self.x, |view| {
            let other = view.recv((view.id() + offset) % n)?;
            Ok((view.own() + other) * 0.5)
        })?;
        Ok(())
    }

    fn observe(&self) -> Result<Observation> {
        Ok(Observation {
            x: crate::linalg::stack(&self.x),
            alpha: None,
            objective: 0.0,
            grad_norm: None,
            weighted_grad_norm_prev_d: None,
            weighted_grad_norm_cur_d: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(n: usize) -> Vec<Vector> {
        vec![Vector::zeros(1); n]
    }

    #[test]
    fn exchange_counts_directed_edges() {
        let top = Topology::complete(4).unwrap();
        let mut net = Network::new(&top);
        net.exchange(&zeros(4), |v| Ok(v.degree())).unwrap();
        net.exchange(&zeros(4), |v| Ok(v.degree())).unwrap();
        assert_eq!(net.ledger().vector_msgs, 2 * 12);
        assert_eq!(net.rounds(), 2);
    }

    #[test]
    fn broadcast_counts_scalars() {
        let top = Topology::path(5).unwrap();
        let mut net = Network::new(&top);
        net.broadcast(&[0, 3]);
        assert_eq!(net.ledger().signal_msgs, 8);
        assert_eq!(net.ledger().vector_msgs, 0);
    }

    #[test]
    fn broken_reader_on_path_is_caught_in_round_one() {
        let top = Topology::path(5).unwrap();
        let mut net = Network::new(&top);
        let mut s = NonNeighborReader { x: zeros(5), offset: 2 };
        let rep = locality_probe(&mut s, &mut net, 3).unwrap();
        let v = rep.violation.unwrap();
        assert_eq!((v.node, v.round, v.accessed), (0, 1, 2));
        assert!(v.to_string().contains("node 0") && v.to_string().contains("node 2"));
    }

    #[test]
    fn leaf_reading_leaf_on_star_is_caught() {
        let top = Topology::star(4).unwrap();
        let mut net = Network::new(&top);
        // Node 0 reads node 1 (legal); node 1 reads node 2 (leaf to leaf).
        let mut s = NonNeighborReader { x: zeros(4), offset: 1 };
        let v = locality_probe(&mut s, &mut net, 1).unwrap().violation.unwrap();
        assert_eq!((v.node, v.accessed), (1, 2));
    }

    #[test]
    fn order_must_be_permutation() {
        let top = Topology::path(3).unwrap();
        assert!(Network::new(&top).with_order(vec![0, 0, 1]).is_err());
        assert!(Network::new(&top).with_order(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn empty_stop_rejected() {
        let top = Topology::path(3).unwrap();
        let mut net = Network::new(&top);
        let mut s = NonNeighborReader { x: zeros(3), offset: 1 };
        let stop = StopCriteria::iterations(0);
        assert!(run(&mut s, &mut net, stop, &TraceReference::default()).is_err());
    }
}
