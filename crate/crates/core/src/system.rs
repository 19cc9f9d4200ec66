//! Systems: finite sets of runs with a shared horizon, plus the
//! indistinguishability structure derived from them.
//!
//! Two points are indistinguishable to agent i exactly when i's local state
//! is equal at both. This is an equivalence, so each agent partitions the
//! point table into information sets; the partition is precomputed at
//! construction and everything downstream (events, knowledge operators)
//! works on flat point indices.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::state::{AgentId, LocalState, Point, Run};

#[derive(Debug)]
pub struct System {
    runs: Vec<Run>,
    horizon: usize,
    n: usize,
    /// class_of[agent_index][point_id] -> equivalence class id
    class_of: Vec<Vec<u32>>,
    /// class_points[agent_index][class_id] -> ascending point ids
    class_points: Vec<Vec<Vec<u32>>>,
}

impl System {
    /// Canonicalizes: runs are sorted and deduplicated, so systems compare
    /// and render identically no matter how the runs were enumerated.
    pub fn new(mut runs: Vec<Run>) -> Result<System> {
        let first = runs
            .first()
            .ok_or_else(|| Error::Model("a system needs at least one run".into()))?;
        let horizon = first.horizon();
        let n = first.n();
        if runs.iter().any(|r| r.horizon() != horizon) {
            return Err(Error::Model(
                "all runs of a system must share one horizon".into(),
            ));
        }
        if runs.iter().any(|r| r.n() != n) {
            return Err(Error::Model(
                "all runs of a system must share one agent count".into(),
            ));
        }
        runs.sort();
        runs.dedup();

        let num_points = runs.len() * (horizon + 1);
        let mut class_of = Vec::with_capacity(n);
        let mut class_points = Vec::with_capacity(n);
        for agent in AgentId::all(n) {
            let mut ids: BTreeMap<&LocalState, u32> = BTreeMap::new();
            let mut of = vec![0u32; num_points];
            let mut pts: Vec<Vec<u32>> = Vec::new();
            let mut pid = 0u32;
            for run in &runs {
                for g in run.states() {
                    let local = &g.locals[agent.index()];
                    let next = ids.len() as u32;
                    let class = *ids.entry(local).or_insert(next);
                    if class as usize == pts.len() {
                        pts.push(Vec::new());
                    }
                    of[pid as usize] = class;
                    pts[class as usize].push(pid);
                    pid += 1;
                }
            }
            class_of.push(of);
            class_points.push(pts);
        }

        Ok(System {
            runs,
            horizon,
            n,
            class_of,
            class_points,
        })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of agents (environment excluded).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_points(&self) -> usize {
        self.runs.len() * (self.horizon + 1)
    }

    /// Points in canonical order: by run, then by time.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.runs.len())
            .flat_map(move |r| (0..=self.horizon).map(move |t| Point::new(r, t)))
    }

    pub fn point_id(&self, p: Point) -> Result<usize> {
        if p.run >= self.runs.len() || p.time > self.horizon {
            return Err(Error::ForeignPoint {
                run: p.run,
                time: p.time,
            });
        }
        Ok(p.run * (self.horizon + 1) + p.time)
    }

    pub fn point_of_id(&self, id: usize) -> Point {
        Point::new(id / (self.horizon + 1), id % (self.horizon + 1))
    }

    fn check_agent(&self, agent: AgentId) -> Result<()> {
        if agent.get() > self.n {
            return Err(Error::AgentOutOfRange {
                agent: agent.get(),
                n: self.n,
            });
        }
        Ok(())
    }

    pub fn local_state(&self, p: Point, agent: AgentId) -> Result<&LocalState> {
        self.point_id(p)?;
        self.check_agent(agent)?;
        self.runs[p.run].local_state_at(agent, p.time)
    }

    pub fn global_state(&self, p: Point) -> Result<&crate::state::GlobalState> {
        self.point_id(p)?;
        self.runs[p.run].state_at(p.time)
    }

    /// Equal local states for `agent`, possibly across different times.
    pub fn indistinguishable(&self, p: Point, q: Point, agent: AgentId) -> Result<bool> {
        self.check_agent(agent)?;
        let pi = self.point_id(p)?;
        let qi = self.point_id(q)?;
        let of = &self.class_of[agent.index()];
        Ok(of[pi] == of[qi])
    }

    /// The information set of `agent` at `p`: every point it cannot tell
    /// apart from `p`, in canonical order. Always contains `p`.
    pub fn information_set(&self, p: Point, agent: AgentId) -> Result<Vec<Point>> {
        self.check_agent(agent)?;
        let pi = self.point_id(p)?;
        let class = self.class_of[agent.index()][pi] as usize;
        Ok(self.class_points[agent.index()][class]
            .iter()
            .map(|&id| self.point_of_id(id as usize))
            .collect())
    }

    pub(crate) fn classes(&self, agent: AgentId) -> &[Vec<u32>] {
        &self.class_points[agent.index()]
    }
}

const EDGE_COLORS: [&str; 6] = ["black", "blue", "red", "darkgreen", "orange", "purple"];

/// Render the indistinguishability structure as a DOT graph: one node per
/// point, one edge set per agent connecting points within an information
/// set. Reflexive loops are suppressed. Output is stable for a given system.
pub fn dot_graph(sys: &System) -> String {
    let mut out = String::new();
    out.push_str("graph indistinguishability {\n");
    out.push_str("  node [shape=box fontsize=10];\n");
    for p in sys.points() {
        let _ = writeln!(out, "  \"{p}\";");
    }
    for agent in AgentId::all(sys.n()) {
        let color = EDGE_COLORS[agent.index() % EDGE_COLORS.len()];
        let _ = writeln!(out, "  // agent {agent}");
        for class in sys.classes(agent) {
            for (i, &a) in class.iter().enumerate() {
                for &b in &class[i + 1..] {
                    let _ = writeln!(
                        out,
                        "  \"{}\" -- \"{}\" [label=\"{agent}\" color={color}];",
                        sys.point_of_id(a as usize),
                        sys.point_of_id(b as usize),
                    );
                }
            }
        }
    }
    out.push_str("}\n");
    out
}
