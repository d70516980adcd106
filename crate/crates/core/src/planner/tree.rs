//! Search tree arena.
//!
//! Nodes hold statistics only. The state of a node is rebuilt by replaying
//! the actions on the path from the root, which keeps memory proportional to
//! the node count rather than to the occupancy matrix size.

use crate::error::{Error, Result};
use crate::instance::Minutes;
use crate::sim::Status;

pub type NodeId = u32;

/// Outcome cached on a node whose state is terminal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Terminal {
    pub status: Status,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub action: Minutes,
    pub parent: Option<NodeId>,
    /// Sorted by action.
    pub children: Vec<NodeId>,
    /// `None` until the first expansion: every action is still untried.
    untried: Option<Vec<Minutes>>,
    pub n: u64,
    pub q: f64,
    pub q_max: f64,
    pub terminal: Option<Terminal>,
}

impl Node {
    fn new(action: Minutes, parent: Option<NodeId>) -> Self {
        Node {
            action,
            parent,
            children: Vec::new(),
            untried: None,
            n: 0,
            q: 0.0,
            q_max: 0.0,
            terminal: None,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.q / self.n as f64
        }
    }

    pub fn is_fully_expanded(&self) -> bool {
        matches!(&self.untried, Some(u) if u.is_empty())
    }
}

/// Which statistic ranks children.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Score {
    Mean,
    Max,
}

/// `value + cp * sqrt(2 ln N / N')`.
pub fn ucb(value: f64, cp: f64, parent_n: u64, child_n: u64) -> f64 {
    value + cp * (2.0 * (parent_n as f64).ln() / child_n as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
    max_action: Minutes,
}

impl Tree {
    pub fn new(max_action: Minutes) -> Self {
        Tree {
            nodes: vec![Node::new(0, None)],
            max_action,
        }
    }

    pub const ROOT: NodeId = 0;

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn child(&self, id: NodeId, action: Minutes) -> Option<NodeId> {
        let node = self.node(id);
        node.children
            .binary_search_by_key(&action, |&c| self.node(c).action)
            .ok()
            .map(|i| node.children[i])
    }

    /// Removes and returns the `pick`-th untried action of `id`
    /// (`pick` is taken modulo the number remaining).
    pub fn take_untried(&mut self, id: NodeId, pick: usize) -> Option<Minutes> {
        let max = self.max_action;
        let untried = self.nodes[id as usize]
            .untried
            .get_or_insert_with(|| (0..=max).collect());
        if untried.is_empty() {
            return None;
        }
        let i = pick % untried.len();
        Some(untried.swap_remove(i))
    }

    pub fn untried_count(&self, id: NodeId) -> usize {
        match &self.node(id).untried {
            None => self.max_action as usize + 1,
            Some(u) => u.len(),
        }
    }

    pub fn add_child(&mut self, parent: NodeId, action: Minutes) -> NodeId {
        let id = NodeId::try_from(self.nodes.len()).expect("tree exceeds u32 nodes");
        self.nodes.push(Node::new(action, Some(parent)));
        let pos = {
            let nodes = &self.nodes;
            nodes[parent as usize]
                .children
                .partition_point(|&c| nodes[c as usize].action < action)
        };
        self.nodes[parent as usize].children.insert(pos, id);
        id
    }

    /// Child maximizing the UCB score. Ties go to the lowest action.
    pub fn best_child(&self, id: NodeId, cp: f64, score: Score) -> Result<NodeId> {
        let node = self.node(id);
        let mut best: Option<(f64, NodeId)> = None;
        for &c in &node.children {
            let child = self.node(c);
            if child.n == 0 {
                return Err(Error::Contract(format!(
                    "child with action {} has no visits",
                    child.action
                )));
            }
            let value = match score {
                Score::Mean => child.mean(),
                Score::Max => child.q_max,
            };
            let s = ucb(value, cp, node.n, child.n);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, c));
            }
        }
        best.map(|(_, c)| c)
            .ok_or_else(|| Error::Contract("best_child on a node without children".into()))
    }

    /// Visited child with the highest mean or best value; lowest action on
    /// ties.
    pub fn commit_choice(&self, id: NodeId, score: Score) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for &c in &self.node(id).children {
            let child = self.node(c);
            if child.n == 0 {
                continue;
            }
            let v = match score {
                Score::Mean => child.mean(),
                Score::Max => child.q_max,
            };
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, c));
            }
        }
        best.map(|(_, c)| c)
    }

    /// Adds one visit with reward `r` to `leaf` and every ancestor.
    pub fn backup(&mut self, leaf: NodeId, r: f64) {
        let mut cur = Some(leaf);
        while let Some(id) = cur {
            let n = &mut self.nodes[id as usize];
            n.n += 1;
            n.q += r;
            if r > n.q_max {
                n.q_max = r;
            }
            cur = n.parent;
        }
    }

    /// Seeds a fresh node with a prior value counted as one visit.
    pub fn warm(&mut self, id: NodeId, value: f64) {
        let n = &mut self.nodes[id as usize];
        n.n = 1;
        n.q = value;
        n.q_max = value;
    }

    /// Actions from the root down to `id`.
    pub fn path(&self, id: NodeId) -> Vec<Minutes> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            out.push(self.node(cur).action);
            cur = p;
        }
        out.reverse();
        out
    }

    /// Makes `id` the new root, dropping everything outside its subtree.
    pub fn reroot(&mut self, id: NodeId) {
        let mut old = std::mem::take(&mut self.nodes);
        let mut map = vec![NodeId::MAX; old.len()];
        let mut order = vec![id];
        let mut i = 0;
        while i < order.len() {
            let cur = order[i];
            map[cur as usize] = i as NodeId;
            order.extend(old[cur as usize].children.iter().copied());
            i += 1;
        }
        self.nodes = order
            .iter()
            .map(|&o| {
                let mut n = std::mem::replace(&mut old[o as usize], Node::new(0, None));
                n.parent = n.parent.map(|p| map[p as usize]).filter(|&p| p != NodeId::MAX);
                for c in &mut n.children {
                    *c = map[*c as usize];
                }
                n
            })
            .collect();
        self.nodes[0].parent = None;
    }
}
