//! Dinic max-flow on exact integer capacities.
//!
//! Capacities arrive pre-scaled to integers (the callers multiply rational
//! rates by `n * lcm(denominators)`), so the computed flow is exact.

pub(crate) struct MaxFlow {
    graph: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i128>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl MaxFlow {
    pub(crate) fn new(node_count: usize) -> Self {
        MaxFlow {
            graph: vec![Vec::new(); node_count],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![-1; node_count],
            iter: vec![0; node_count],
        }
    }

    /// Adds a directed edge and returns its id; ids pair with their reverse
    /// edge as `id ^ 1`.
    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: i128) -> usize {
        debug_assert!(cap >= 0);
        let id = self.to.len();
        self.graph[from].push(id);
        self.to.push(to);
        self.cap.push(cap);
        self.graph[to].push(id + 1);
        self.to.push(from);
        self.cap.push(0);
        id
    }

    /// Flow pushed through edge `id` (residual accumulated on the reverse).
    pub(crate) fn flow(&self, id: usize) -> i128 {
        self.cap[id ^ 1]
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = std::collections::VecDeque::from([source]);
        self.level[source] = 0;
        while let Some(u) = queue.pop_front() {
            for &e in &self.graph[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[sink] >= 0
    }

    fn dfs(&mut self, u: usize, sink: usize, limit: i128) -> i128 {
        if u == sink {
            return limit;
        }
        while self.iter[u] < self.graph[u].len() {
            let e = self.graph[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && self.level[v] == self.level[u] + 1 {
                let pushed = self.dfs(v, sink, limit.min(self.cap[e]));
                if pushed > 0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            self.iter[u] += 1;
        }
        0
    }

    pub(crate) fn max_flow(&mut self, source: usize, sink: usize) -> i128 {
        let mut total = 0i128;
        while self.bfs(source, sink) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.dfs(source, sink, i128::MAX);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}
