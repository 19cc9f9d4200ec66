//! Game representations and their systems form.
//!
//! The same two-player game appears three ways: a normal-form payoff
//! table, an extensive-form tree whose simulation must reproduce the
//! table, and a five-state partition model whose states carry strategy
//! profiles and per-player information cells. A separate single-agent
//! tree models imperfect recall: an information set that merges two nodes
//! the agent could tell apart if it remembered nature's opening move.
//! Turning that tree into a system makes the folk remedy precise: an
//! agent that may switch strategies and knows its current strategy can
//! read its true node off its own local state.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::event::Event;
use crate::state::{GlobalState, LocalState, Point, Run};
use crate::system::System;
use crate::value::Value;

// ---- normal form -----------------------------------------------------------

#[derive(Clone, Debug)]
pub struct NormalFormGame {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    table: BTreeMap<(String, String), (i64, i64)>,
}

impl NormalFormGame {
    /// The table must cover the full label cross product.
    pub fn new(
        rows: Vec<&str>,
        cols: Vec<&str>,
        entries: Vec<((&str, &str), (i64, i64))>,
    ) -> Result<NormalFormGame> {
        let table: BTreeMap<(String, String), (i64, i64)> = entries
            .into_iter()
            .map(|((r, c), p)| ((r.to_string(), c.to_string()), p))
            .collect();
        for r in &rows {
            for c in &cols {
                if !table.contains_key(&(r.to_string(), c.to_string())) {
                    return Err(Error::Model(format!("payoff table lacks entry ({r},{c})")));
                }
            }
        }
        if table.len() != rows.len() * cols.len() {
            return Err(Error::Model("payoff table has entries off the label grid".into()));
        }
        Ok(NormalFormGame {
            rows: rows.into_iter().map(String::from).collect(),
            cols: cols.into_iter().map(String::from).collect(),
            table,
        })
    }

    pub fn payoff(&self, row: &str, col: &str) -> Result<(i64, i64)> {
        self.table
            .get(&(row.to_string(), col.to_string()))
            .copied()
            .ok_or_else(|| {
                Error::Model(format!(
                    "unknown strategy profile ({row},{col}); rows {:?}, cols {:?}",
                    self.rows, self.cols
                ))
            })
    }
}

/// The running two-stage example: player 1 moves twice (second letter),
/// player 2 once in between.
pub fn two_stage_normal_form() -> NormalFormGame {
    NormalFormGame::new(
        vec!["aa", "ad", "da", "dd"],
        vec!["A", "D"],
        vec![
            (("aa", "A"), (3, 3)),
            (("aa", "D"), (4, 2)),
            (("ad", "A"), (3, 2)),
            (("ad", "D"), (4, 2)),
            (("da", "A"), (1, 2)),
            (("da", "D"), (1, 3)),
            (("dd", "A"), (1, 2)),
            (("dd", "D"), (1, 3)),
        ],
    )
    .expect("builtin table is total")
}

// ---- extensive form --------------------------------------------------------

#[derive(Clone, Debug)]
pub enum NodeKind {
    /// Chance move; resolved externally per play.
    Nature { moves: Vec<(String, String)> },
    Decision {
        player: usize,
        info_set: String,
        moves: Vec<(String, String)>,
    },
    Terminal { payoffs: Vec<i64> },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub label: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn nature(label: &str, moves: Vec<(&str, &str)>) -> Node {
        Node {
            label: label.into(),
            kind: NodeKind::Nature {
                moves: moves
                    .into_iter()
                    .map(|(a, c)| (a.to_string(), c.to_string()))
                    .collect(),
            },
        }
    }

    pub fn decision(label: &str, player: usize, info_set: &str, moves: Vec<(&str, &str)>) -> Node {
        Node {
            label: label.into(),
            kind: NodeKind::Decision {
                player,
                info_set: info_set.into(),
                moves: moves
                    .into_iter()
                    .map(|(a, c)| (a.to_string(), c.to_string()))
                    .collect(),
            },
        }
    }

    pub fn terminal(label: &str, payoffs: Vec<i64>) -> Node {
        Node {
            label: label.into(),
            kind: NodeKind::Terminal { payoffs },
        }
    }

    fn children(&self) -> &[(String, String)] {
        match &self.kind {
            NodeKind::Nature { moves } | NodeKind::Decision { moves, .. } => moves,
            NodeKind::Terminal { .. } => &[],
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameTree {
    nodes: Vec<Node>,
    by_label: BTreeMap<String, usize>,
    players: usize,
}

impl GameTree {
    /// First node is the root. Checks tree shape, that information sets
    /// group nodes of one owner with identical action sets, and that
    /// terminal payoffs cover every player.
    pub fn new(nodes: Vec<Node>) -> Result<GameTree> {
        if nodes.is_empty() {
            return Err(Error::Model("game tree needs at least a root".into()));
        }
        let mut by_label = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if by_label.insert(node.label.clone(), i).is_some() {
                return Err(Error::Model(format!("duplicate node label {}", node.label)));
            }
        }
        let mut parents: BTreeMap<&str, &str> = BTreeMap::new();
        for node in &nodes {
            for (_, child) in node.children() {
                if !by_label.contains_key(child) {
                    return Err(Error::Model(format!(
                        "node {} references missing child {child}",
                        node.label
                    )));
                }
                if parents.insert(child, &node.label).is_some() {
                    return Err(Error::Model(format!("node {child} has two parents")));
                }
            }
        }
        // reachability from the root
        let mut seen = BTreeSet::from([nodes[0].label.as_str()]);
        let mut stack = vec![&nodes[0]];
        while let Some(node) = stack.pop() {
            for (_, child) in node.children() {
                if seen.insert(child) {
                    stack.push(&nodes[by_label[child]]);
                }
            }
        }
        if seen.len() != nodes.len() {
            return Err(Error::Model("game tree has unreachable nodes".into()));
        }

        let mut players = 0;
        let mut sets: BTreeMap<&str, (usize, Vec<String>)> = BTreeMap::new();
        for node in &nodes {
            if let NodeKind::Decision {
                player,
                info_set,
                moves,
            } = &node.kind
            {
                if *player == 0 {
                    return Err(Error::Model("player indices are 1-based".into()));
                }
                players = players.max(*player);
                let mut actions: Vec<String> = moves.iter().map(|(a, _)| a.clone()).collect();
                actions.sort();
                match sets.get(info_set.as_str()) {
                    None => {
                        sets.insert(info_set, (*player, actions));
                    }
                    Some((owner, acts)) => {
                        if *owner != *player || *acts != actions {
                            return Err(Error::Model(format!(
                                "information set {info_set} mixes owners or action sets"
                            )));
                        }
                    }
                }
            }
        }
        for node in &nodes {
            if let NodeKind::Terminal { payoffs } = &node.kind {
                if payoffs.len() != players {
                    return Err(Error::Model(format!(
                        "terminal {} pays {} players, tree has {players}",
                        node.label,
                        payoffs.len()
                    )));
                }
            }
        }
        Ok(GameTree {
            nodes,
            by_label,
            players,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, label: &str) -> Result<&Node> {
        self.by_label
            .get(label)
            .map(|&i| &self.nodes[i])
            .ok_or_else(|| Error::Model(format!("no node labeled {label}")))
    }

    /// Information sets of one player, with their member nodes.
    pub fn info_sets(&self, player: usize) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for node in &self.nodes {
            if let NodeKind::Decision {
                player: p,
                info_set,
                ..
            } = &node.kind
            {
                if *p == player {
                    out.entry(info_set.clone()).or_default().push(node.label.clone());
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    pub name: String,
    /// Information set -> action label.
    pub choices: BTreeMap<String, String>,
}

impl Strategy {
    pub fn new<'a>(name: &str, choices: impl IntoIterator<Item = (&'a str, &'a str)>) -> Strategy {
        Strategy {
            name: name.into(),
            choices: choices
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    fn choice_at(&self, info_set: &str) -> Result<&str> {
        self.choices
            .get(info_set)
            .map(String::as_str)
            .ok_or_else(|| {
                Error::Model(format!(
                    "strategy {} is undefined at information set {info_set}",
                    self.name
                ))
            })
    }
}

#[derive(Clone, Debug)]
pub struct PlayOutcome {
    pub terminal: String,
    /// (node, action) pairs from root to terminal.
    pub path: Vec<(String, String)>,
    pub payoffs: Vec<i64>,
}

/// Follow one play from the root: players move per their strategies,
/// nature per `nature` (node label -> action).
pub fn simulate_play(
    t: &GameTree,
    strategies: &[Strategy],
    nature: &BTreeMap<String, String>,
) -> Result<PlayOutcome> {
    if strategies.len() != t.players() {
        return Err(Error::Model(format!(
            "{} strategies for a {}-player tree",
            strategies.len(),
            t.players()
        )));
    }
    let mut node = t.root();
    let mut path = Vec::new();
    loop {
        let (action, moves) = match &node.kind {
            NodeKind::Terminal { payoffs } => {
                return Ok(PlayOutcome {
                    terminal: node.label.clone(),
                    path,
                    payoffs: payoffs.clone(),
                });
            }
            NodeKind::Nature { moves } => {
                let a = nature.get(&node.label).ok_or_else(|| {
                    Error::Model(format!("no nature choice for node {}", node.label))
                })?;
                (a.clone(), moves)
            }
            NodeKind::Decision {
                player,
                info_set,
                moves,
            } => (
                strategies[player - 1].choice_at(info_set)?.to_string(),
                moves,
            ),
        };
        let next = moves
            .iter()
            .find(|(a, _)| *a == action)
            .map(|(_, child)| child)
            .ok_or_else(|| {
                Error::Model(format!("node {} has no action {action}", node.label))
            })?;
        path.push((node.label.clone(), action.clone()));
        node = t.node(next)?;
    }
}

/// Average payoffs over weighted nature resolutions.
pub fn expected_utility(
    t: &GameTree,
    strategies: &[Strategy],
    nature_weights: &[(BTreeMap<String, String>, f64)],
) -> Result<Vec<f64>> {
    let total: f64 = nature_weights.iter().map(|(_, w)| w).sum();
    if nature_weights.is_empty() || total <= 0.0 {
        return Err(Error::Model("nature weights must be nonempty and positive".into()));
    }
    let mut acc = vec![0.0; t.players()];
    for (nature, w) in nature_weights {
        let out = simulate_play(t, strategies, nature)?;
        for (i, p) in out.payoffs.iter().enumerate() {
            acc[i] += *p as f64 * w / total;
        }
    }
    Ok(acc)
}

/// The two-stage game as a tree. Player 2 moves without seeing player 1's
/// first move (one information set); player 1's second move sees its own
/// first move but not player 2's reply. Terminal payoffs replay the
/// normal-form table, keyed by the moves actually played.
pub fn two_stage_tree() -> GameTree {
    let g = two_stage_normal_form();
    let mut nodes = vec![Node::decision("root", 1, "p1-first", vec![("a", "a"), ("d", "d")])];
    for first in ["a", "d"] {
        let (up, down) = (format!("{first}A"), format!("{first}D"));
        nodes.push(Node::decision(
            first,
            2,
            "p2-reply",
            vec![("A", up.as_str()), ("D", down.as_str())],
        ));
    }
    for first in ["a", "d"] {
        for reply in ["A", "D"] {
            let label = format!("{first}{reply}");
            let (cont, stop) = (format!("{label}a"), format!("{label}d"));
            nodes.push(Node::decision(
                &label,
                1,
                &format!("p1-second-{first}"),
                vec![("a", cont.as_str()), ("d", stop.as_str())],
            ));
            for second in ["a", "d"] {
                let (u1, u2) = g
                    .payoff(&format!("{first}{second}"), reply)
                    .expect("builtin labels");
                nodes.push(Node::terminal(&format!("{label}{second}"), vec![u1, u2]));
            }
        }
    }
    GameTree::new(nodes).expect("builtin tree is well formed")
}

/// Player 1's table strategy: first letter at the opening move, second
/// letter at both second-stage information sets.
pub fn p1_strategy(label: &str) -> Result<Strategy> {
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != 2 || chars.iter().any(|c| !"ad".contains(*c)) {
        return Err(Error::Model(format!("unknown player-1 strategy {label}")));
    }
    let (first, second) = (chars[0].to_string(), chars[1].to_string());
    Ok(Strategy::new(
        label,
        [
            ("p1-first", first.as_str()),
            ("p1-second-a", second.as_str()),
            ("p1-second-d", second.as_str()),
        ],
    ))
}

pub fn p2_strategy(label: &str) -> Result<Strategy> {
    if label != "A" && label != "D" {
        return Err(Error::Model(format!("unknown player-2 strategy {label}")));
    }
    Ok(Strategy::new(label, [("p2-reply", label)]))
}

// ---- state-space form ------------------------------------------------------

#[derive(Clone, Debug)]
pub struct StateSpaceModel {
    pub states: Vec<String>,
    /// State -> one strategy label per player.
    pub profiles: BTreeMap<String, Vec<String>>,
    /// Per player, a partition of the states into cells.
    pub partitions: Vec<Vec<BTreeSet<String>>>,
}

impl StateSpaceModel {
    pub fn new(
        states: Vec<&str>,
        profiles: Vec<(&str, Vec<&str>)>,
        partitions: Vec<Vec<Vec<&str>>>,
    ) -> Result<StateSpaceModel> {
        let m = StateSpaceModel {
            states: states.into_iter().map(String::from).collect(),
            profiles: profiles
                .into_iter()
                .map(|(s, p)| (s.to_string(), p.into_iter().map(String::from).collect()))
                .collect(),
            partitions: partitions
                .into_iter()
                .map(|cells| {
                    cells
                        .into_iter()
                        .map(|c| c.into_iter().map(String::from).collect())
                        .collect()
                })
                .collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn players(&self) -> usize {
        self.partitions.len()
    }

    /// Partition shape plus the knowing-your-own-strategy invariant: a
    /// player's strategy component is constant on each of its cells.
    pub fn validate(&self) -> Result<()> {
        let state_set: BTreeSet<&String> = self.states.iter().collect();
        if state_set.len() != self.states.len() {
            return Err(Error::Model("duplicate state labels".into()));
        }
        let players = self.players();
        if players == 0 {
            return Err(Error::Model("model needs at least one player".into()));
        }
        for (s, p) in &self.profiles {
            if !state_set.contains(s) {
                return Err(Error::Model(format!("profile for unknown state {s}")));
            }
            if p.len() != players {
                return Err(Error::Model(format!(
                    "state {s} assigns {} strategies for {players} players",
                    p.len()
                )));
            }
        }
        for s in &self.states {
            if !self.profiles.contains_key(s) {
                return Err(Error::Model(format!("state {s} has no profile")));
            }
        }
        for (pi, cells) in self.partitions.iter().enumerate() {
            let mut covered: BTreeSet<&String> = BTreeSet::new();
            for cell in cells {
                if cell.is_empty() {
                    return Err(Error::Model(format!("player {} has an empty cell", pi + 1)));
                }
                for s in cell {
                    if !state_set.contains(s) {
                        return Err(Error::Model(format!("cell references unknown state {s}")));
                    }
                    if !covered.insert(s) {
                        return Err(Error::Model(format!(
                            "player {} cells overlap at {s}",
                            pi + 1
                        )));
                    }
                }
                let mut labels = cell.iter().map(|s| &self.profiles[s][pi]);
                let first = labels.next().expect("non-empty cell");
                if labels.any(|l| l != first) {
                    return Err(Error::Model(format!(
                        "player {} cell {{{}}} mixes strategies",
                        pi + 1,
                        cell.iter().cloned().collect::<Vec<_>>().join(",")
                    )));
                }
            }
            if covered.len() != self.states.len() {
                return Err(Error::Model(format!(
                    "player {} partition does not cover all states",
                    pi + 1
                )));
            }
        }
        Ok(())
    }
}

/// The five-state model of the two-stage game. Both players play (aa,A)
/// at w1 and w5, but only at w5 does player 2 know it: w5 sits alone in
/// both partitions, while w1 shares cells with w2 and w3.
pub fn two_stage_state_space() -> StateSpaceModel {
    StateSpaceModel::new(
        vec!["w1", "w2", "w3", "w4", "w5"],
        vec![
            ("w1", vec!["aa", "A"]),
            ("w2", vec!["aa", "D"]),
            ("w3", vec!["ad", "A"]),
            ("w4", vec!["ad", "D"]),
            ("w5", vec!["aa", "A"]),
        ],
        vec![
            vec![vec!["w1", "w2"], vec!["w3", "w4"], vec!["w5"]],
            vec![vec!["w1", "w3"], vec!["w2", "w4"], vec!["w5"]],
        ],
    )
    .expect("builtin model is consistent")
}

/// One horizon-0 run per state. The environment carries the state label
/// and its profile; each player's local state is its partition cell plus
/// its own strategy, so indistinguishability reproduces the partitions.
pub fn build_state_space_system(m: &StateSpaceModel) -> Result<System> {
    m.validate()?;
    let cell_of = |player: usize, state: &String| -> &BTreeSet<String> {
        m.partitions[player]
            .iter()
            .find(|c| c.contains(state))
            .expect("partitions cover states")
    };
    let runs = m
        .states
        .iter()
        .map(|s| {
            let profile = &m.profiles[s];
            let env = Value::rec([
                ("profile", Value::seq(profile.iter().map(|l| Value::sym(l.clone())))),
                ("state", Value::sym(s.clone())),
            ]);
            let locals = (0..m.players())
                .map(|pi| {
                    LocalState(Value::rec([
                        (
                            "cell",
                            Value::seq(cell_of(pi, s).iter().map(|x| Value::sym(x.clone()))),
                        ),
                        ("plays", Value::sym(profile[pi].clone())),
                    ]))
                })
                .collect();
            Run::new(vec![GlobalState::new(env, locals)])
        })
        .collect::<Result<Vec<_>>>()?;
    System::new(runs)
}

/// The point carrying a given state label.
pub fn state_point(sys: &System, label: &str) -> Result<Point> {
    for p in sys.points() {
        if sys.global_state(p)?.env.at("state").and_then(Value::as_sym) == Some(label) {
            return Ok(p);
        }
    }
    Err(Error::Model(format!("no state labeled {label} in the system")))
}

/// Holds where the environment's profile equals the given labels.
pub fn event_profile(sys: &System, profile: &[&str]) -> Event {
    let want = Value::seq(profile.iter().map(|l| Value::sym(*l)));
    let name = format!("profile=({})", profile.join(","));
    Event::from_fn(sys, name, move |s, p| {
        s.global_state(p)
            .ok()
            .and_then(|g| g.env.at("profile"))
            .map(|v| *v == want)
            .unwrap_or(false)
    })
}

// ---- imperfect recall ------------------------------------------------------

/// Payoffs of the forgetful single-agent game, one per terminal. The
/// source figure is unavailable, so these are parameters with neutral
/// defaults rather than fixed values.
#[derive(Clone, Copy, Debug)]
pub struct ForgetfulPayoffs {
    pub stop_x1: i64,
    pub stop_x2: i64,
    pub left_x3: i64,
    pub right_x3: i64,
    pub left_x4: i64,
    pub right_x4: i64,
}

impl Default for ForgetfulPayoffs {
    fn default() -> Self {
        ForgetfulPayoffs {
            stop_x1: 2,
            stop_x2: 2,
            left_x3: 1,
            right_x3: 3,
            left_x4: 3,
            right_x4: 1,
        }
    }
}

/// Nature opens to x1 or x2; the agent stops (S) or continues (B); both
/// continuations land in the one information set X = {x3, x4} with moves
/// L/R. At X the agent has forgotten which opening nature played.
pub fn forgetful_tree(p: &ForgetfulPayoffs) -> GameTree {
    GameTree::new(vec![
        Node::nature("root", vec![("x1", "x1"), ("x2", "x2")]),
        Node::decision("x1", 1, "x1", vec![("S", "x1S"), ("B", "x3")]),
        Node::decision("x2", 1, "x2", vec![("S", "x2S"), ("B", "x4")]),
        Node::decision("x3", 1, "X", vec![("L", "x3L"), ("R", "x3R")]),
        Node::decision("x4", 1, "X", vec![("L", "x4L"), ("R", "x4R")]),
        Node::terminal("x1S", vec![p.stop_x1]),
        Node::terminal("x2S", vec![p.stop_x2]),
        Node::terminal("x3L", vec![p.left_x3]),
        Node::terminal("x3R", vec![p.right_x3]),
        Node::terminal("x4L", vec![p.left_x4]),
        Node::terminal("x4R", vec![p.right_x4]),
    ])
    .expect("builtin tree is well formed")
}

pub fn forgetful_strategy_f() -> Strategy {
    Strategy::new("f", [("x1", "S"), ("x2", "B"), ("X", "R")])
}

pub fn forgetful_strategy_f_prime() -> Strategy {
    Strategy::new("f'", [("x1", "B"), ("x2", "S"), ("X", "L")])
}

/// Continues from both openings; reaches both members of X.
pub fn forgetful_strategy_bb() -> Strategy {
    Strategy::new("bb", [("x1", "B"), ("x2", "B"), ("X", "R")])
}

/// Replace the current strategy on arrival at a node.
#[derive(Clone, Debug)]
pub struct SwitchPlan {
    pub at: String,
    pub to: Strategy,
}

impl SwitchPlan {
    pub fn new(at: &str, to: Strategy) -> SwitchPlan {
        SwitchPlan { at: at.into(), to }
    }
}

/// One run per nature resolution of a single-agent tree. The agent's
/// local state is what it can see: its current information set and its
/// own past moves, never nature's; with `switch_aware` also the label of
/// the strategy it is currently using. Switching without awareness is
/// rejected: the changed behavior could not be a function of the local
/// state.
pub fn imperfect_recall_system(
    t: &GameTree,
    base: &Strategy,
    switch: Option<&SwitchPlan>,
    switch_aware: bool,
) -> Result<System> {
    if t.players() != 1 {
        return Err(Error::Model(format!(
            "imperfect-recall systems take a single-agent tree, got {} players",
            t.players()
        )));
    }
    if !t.info_sets(1).values().any(|nodes| nodes.len() > 1) {
        return Err(Error::Model(
            "tree has no imperfect-recall information set".into(),
        ));
    }
    if switch.is_some() && !switch_aware {
        return Err(Error::Model(
            "a strategy switch requires switch awareness; an unaware agent's \
             play must be a function of its local state"
                .into(),
        ));
    }

    struct Walk<'a> {
        tree: &'a GameTree,
        switch: Option<&'a SwitchPlan>,
        aware: bool,
        visited: BTreeSet<String>,
        traces: Vec<Vec<GlobalState>>,
    }

    impl Walk<'_> {
        fn local(&self, at: &str, acts: &[String], strategy: &Strategy) -> LocalState {
            let mut v = Value::rec([
                ("acts", Value::seq(acts.iter().map(|a| Value::sym(a.clone())))),
                ("at", Value::sym(at)),
            ]);
            if self.aware {
                v = v.with("using", Value::sym(strategy.name.clone()));
            }
            LocalState(v)
        }

        fn global(
            &self,
            node: &Node,
            history: &[String],
            acts: &[String],
            strategy: &Strategy,
        ) -> GlobalState {
            let at = match &node.kind {
                NodeKind::Nature { .. } => "start".to_string(),
                NodeKind::Decision { info_set, .. } => info_set.clone(),
                NodeKind::Terminal { .. } => "done".to_string(),
            };
            let env = Value::rec([
                (
                    "history",
                    Value::seq(history.iter().map(|a| Value::sym(a.clone()))),
                ),
                ("node", Value::sym(node.label.clone())),
            ]);
            GlobalState::new(env, vec![self.local(&at, acts, strategy)])
        }

        fn go(
            &mut self,
            node: &Node,
            strategy: Strategy,
            history: Vec<String>,
            acts: Vec<String>,
            mut trace: Vec<GlobalState>,
        ) -> Result<()> {
            self.visited.insert(node.label.clone());
            let strategy = match self.switch {
                Some(plan) if plan.at == node.label => plan.to.clone(),
                _ => strategy,
            };
            trace.push(self.global(node, &history, &acts, &strategy));
            match &node.kind {
                NodeKind::Terminal { .. } => {
                    self.traces.push(trace);
                    Ok(())
                }
                NodeKind::Nature { moves } => {
                    for (action, child) in moves.clone() {
                        let mut h = history.clone();
                        h.push(action);
                        let child = self.tree.node(&child)?.clone();
                        self.go(&child, strategy.clone(), h, acts.clone(), trace.clone())?;
                    }
                    Ok(())
                }
                NodeKind::Decision {
                    info_set, moves, ..
                } => {
                    let action = strategy.choice_at(info_set)?.to_string();
                    let child = moves
                        .iter()
                        .find(|(a, _)| *a == action)
                        .map(|(_, c)| c.clone())
                        .ok_or_else(|| {
                            Error::Model(format!("node {} has no action {action}", node.label))
                        })?;
                    let mut h = history.clone();
                    h.push(action.clone());
                    let mut acts = acts;
                    acts.push(action);
                    let child = self.tree.node(&child)?.clone();
                    self.go(&child, strategy, h, acts, trace)
                }
            }
        }
    }

    let mut walk = Walk {
        tree: t,
        switch,
        aware: switch_aware,
        visited: BTreeSet::new(),
        traces: Vec::new(),
    };
    walk.go(
        t.root(),
        base.clone(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
    )?;

    if let Some(plan) = switch {
        if !walk.visited.contains(&plan.at) {
            return Err(Error::Model(format!(
                "switch refers to node {}, which no play reaches",
                plan.at
            )));
        }
    }

    let horizon = walk
        .traces
        .iter()
        .map(|tr| tr.len())
        .max()
        .expect("at least one play");
    let runs = walk
        .traces
        .into_iter()
        .map(|mut tr| {
            while tr.len() < horizon {
                tr.push(tr.last().expect("non-empty").clone());
            }
            Run::new(tr)
        })
        .collect::<Result<Vec<_>>>()?;
    System::new(runs)
}

/// Holds where the play currently stands at `label`.
pub fn event_at_node(sys: &System, label: &str) -> Event {
    let want = label.to_string();
    Event::from_fn(sys, format!("at-node-{label}"), move |s, p| {
        s.global_state(p)
            .ok()
            .and_then(|g| g.env.at("node"))
            .and_then(Value::as_sym)
            == Some(want.as_str())
    })
}
