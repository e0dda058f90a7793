//! Reference implementations used only by tests.
//!
//! These are written directly from the textbook definitions and share no
//! code with the library.

#![allow(dead_code)]

use std::collections::VecDeque;

/// Jaro similarity by the textbook definition: characters match when equal
/// and no further apart than `floor(max_len / 2) - 1`, each character of `b`
/// matching at most once in left-to-right order; `t` is half the number of
/// matched positions whose characters differ in order.
pub fn jaro_reference(a: &str, b: &str) -> f64 {
    let s1: Vec<char> = a.chars().collect();
    let s2: Vec<char> = b.chars().collect();
    let (n1, n2) = (s1.len() as i64, s2.len() as i64);
    if n1 == 0 && n2 == 0 {
        return 1.0;
    }
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    let reach = (n1.max(n2) / 2 - 1).max(0);
    let mut taken = vec![false; s2.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n1 {
        let mut j = (i - reach).max(0);
        while j <= (i + reach).min(n2 - 1) {
            if !taken[j as usize] && s1[i as usize] == s2[j as usize] {
                taken[j as usize] = true;
                pairs.push((i as usize, j as usize));
                break;
            }
            j += 1;
        }
    }
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let from_a: String = pairs.iter().map(|&(i, _)| s1[i]).collect();
    let mut js: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    js.sort_unstable();
    let from_b: String = js.iter().map(|&j| s2[j]).collect();
    let mismatched = from_a
        .chars()
        .zip(from_b.chars())
        .filter(|(x, y)| x != y)
        .count();
    let m = m as f64;
    let t = mismatched as f64 / 2.0;
    (m / n1 as f64 + m / n2 as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler on lowercased inputs with scale 0.1 and prefix cap 4.
pub fn jaro_winkler_reference(a: &str, b: &str) -> f64 {
    let a = a.to_lowercase();
    let b = b.to_lowercase();
    let j = jaro_reference(&a, &b);
    let mut l = 0;
    for (x, y) in a.chars().zip(b.chars()) {
        if x != y || l == 4 {
            break;
        }
        l += 1;
    }
    j + l as f64 * 0.1 * (1.0 - j)
}

/// Connected components of the graph that joins every pair inside each
/// group, found by breadth-first search. Components are sorted member lists
/// ordered by their smallest member.
pub fn bfs_components(n: usize, groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for g in groups {
        for &x in g {
            for &y in g {
                if x != y {
                    adj[x].push(y);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
