use std::collections::{BTreeSet, HashMap};

/// Local tensor names mapped to canonical buffers.
///
/// Each name points directly at its root, so resolution is a single lookup;
/// binding an alias copies the target's root.
#[derive(Clone, Debug, Default)]
pub struct AliasEnvironment {
    root: HashMap<String, String>,
    overlap: BTreeSet<String>,
}

/// Result of [`resolve_alias`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolved {
    pub buffer: String,
    pub may_overlap: bool,
}

impl AliasEnvironment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_tracked(&self, name: &str) -> bool {
        self.root.contains_key(name)
    }

    /// Binds `name` to a fresh buffer of its own, clearing any earlier alias.
    pub fn bind_fresh(&mut self, name: &str) {
        self.root.insert(name.to_string(), name.to_string());
    }

    /// Records `name := target`.
    pub fn bind_alias(&mut self, name: &str, target: &str) {
        let root = self.resolve(target).buffer;
        if root != name {
            self.root.insert(name.to_string(), root);
        } else {
            self.bind_fresh(name);
        }
    }

    /// Canonical buffer of `name`. Unknown names become fresh may-overlap
    /// buffers.
    pub fn resolve(&mut self, name: &str) -> Resolved {
        if !self.root.contains_key(name) {
            self.root.insert(name.to_string(), name.to_string());
            self.overlap.insert(name.to_string());
        }
        let buffer = self.root[name].clone();
        let may_overlap = self.overlap.contains(&buffer);
        Resolved { buffer, may_overlap }
    }

    pub fn mark_overlap(&mut self, name: &str) {
        let root = self.resolve(name).buffer;
        self.overlap.insert(root);
    }

    pub fn is_overlapping(&self, buffer: &str) -> bool {
        self.overlap.contains(buffer)
    }
}

pub fn resolve_alias(env: &mut AliasEnvironment, name: &str) -> Resolved {
    env.resolve(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fresh_binding_is_not_overlapping() {
        let mut env = AliasEnvironment::new();
        env.bind_fresh("tmp");
        assert_eq!(resolve_alias(&mut env, "tmp"), Resolved { buffer: "tmp".into(), may_overlap: false });
    }

    #[test]
    fn unknown_name_is_overlapping() {
        let mut env = AliasEnvironment::new();
        assert_eq!(resolve_alias(&mut env, "z"), Resolved { buffer: "z".into(), may_overlap: true });
    }

    #[test]
    fn chain_of_three_shares_a_root() {
        let mut env = AliasEnvironment::new();
        env.bind_fresh("c");
        env.bind_alias("b", "c");
        env.bind_alias("a", "b");
        let ids: BTreeSet<_> = ["a", "b", "c"].iter().map(|n| env.resolve(n).buffer).collect();
        assert_eq!(ids.len(), 1);
    }

    /// Union-find over the alias statements, used as an independent model.
    struct UnionFind(Vec<usize>);

    impl UnionFind {
        fn find(&mut self, x: usize) -> usize {
            if self.0[x] != x {
                let r = self.find(self.0[x]);
                self.0[x] = r;
            }
            self.0[x]
        }
    }

    proptest! {
        // Names are only aliased once and only to already-bound names, so
        // union-find equivalence matches the environment's roots exactly.
        #[test]
        fn matches_union_find(links in proptest::collection::vec((any::<bool>(), any::<prop::sample::Index>()), 1..12)) {
            let n = links.len() + 1;
            let mut env = AliasEnvironment::new();
            let mut uf = UnionFind((0..n).collect());
            env.bind_fresh("v0");
            for (i, (fresh, l)) in links.iter().enumerate() {
                let name = i + 1;
                if *fresh {
                    env.bind_fresh(&format!("v{name}"));
                    continue;
                }
                let target = l.index(name);
                env.bind_alias(&format!("v{name}"), &format!("v{target}"));
                let (a, b) = (uf.find(name), uf.find(target));
                uf.0[a] = b;
            }
            for a in 0..n {
                for b in 0..n {
                    let same_env = env.resolve(&format!("v{a}")).buffer == env.resolve(&format!("v{b}")).buffer;
                    prop_assert_eq!(same_env, uf.find(a) == uf.find(b));
                }
            }
        }
    }
}
