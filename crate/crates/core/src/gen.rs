//! Seeded generators for test and benchmark data: random graphs with
//! mixed edge shapes, random connected queries over them, long chains and
//! a university-style hierarchy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::rdf::{ntriples, Dictionary, EncodedTriple, Term, TermId, RDF_TYPE};

pub const EX: &str = "http://example.org/";
pub const UB: &str = "http://www.lehigh.edu/~zhp2/2004/0401/univ-bench.owl#";

/// A dataset kept in encoded form together with its dictionary.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    pub dict: Dictionary,
    pub triples: Vec<EncodedTriple>,
}

impl Instance {
    pub fn add(&mut self, s: Term, p: Term, o: Term) {
        let t = EncodedTriple::new(self.dict.encode(s), self.dict.encode(p), self.dict.encode(o));
        self.triples.push(t);
    }

    pub fn write_ntriples<W: std::io::Write>(&self, out: W) -> Result<()> {
        ntriples::write(out, &self.dict, &self.triples)
    }

    pub fn to_ntriples(&self) -> String {
        let mut buf = Vec::new();
        self.write_ntriples(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("terms are UTF-8")
    }
}

fn ex(local: impl std::fmt::Display) -> Term {
    Term::iri(format!("{EX}{local}"))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct GraphParams {
    pub vertices: usize,
    pub properties: usize,
    pub triples: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { vertices: 60, properties: 4, triples: 150 }
    }
}

#[derive(Copy, Clone, Debug)]
enum Shape {
    Uniform,
    /// Edges towards lower ids, so the property is acyclic.
    Forest,
    /// Long runs of consecutive ids with occasional back edges.
    Chains,
    /// Many subjects, few objects, like a type property.
    Typed,
}

/// A random graph over `ex:v<i>` vertices and `ex:p<j>` properties.
/// Duplicates are possible; the store removes them.
pub fn random_graph(params: GraphParams, rng: &mut impl Rng) -> Instance {
    let n = params.vertices.max(2);
    let props = params.properties.max(1);
    let shapes: Vec<Shape> = (0..props)
        .map(|_| *[Shape::Uniform, Shape::Forest, Shape::Chains, Shape::Typed].choose(rng).unwrap())
        .collect();
    let mut inst = Instance::default();
    // register vertices first so every one of them is part of the data
    // range even if few edges touch it
    for i in 0..n {
        inst.dict.encode(ex(format!("v{i}")));
    }
    let mut cursor = vec![0usize; props];
    for _ in 0..params.triples.max(1) {
        let j = rng.gen_range(0..props);
        let (s, o) = match shapes[j] {
            Shape::Uniform => (rng.gen_range(0..n), rng.gen_range(0..n)),
            Shape::Forest => {
                let s = rng.gen_range(1..n);
                (s, rng.gen_range(0..s))
            }
            Shape::Chains => {
                let s = if rng.gen_bool(0.9) { cursor[j] } else { rng.gen_range(0..n) };
                let o = if rng.gen_bool(0.05) { rng.gen_range(0..n) } else { (s + 1) % n };
                cursor[j] = o;
                (s, o)
            }
            Shape::Typed => (rng.gen_range(0..n), rng.gen_range(0..n.min(4))),
        };
        inst.add(ex(format!("v{s}")), ex(format!("p{j}")), ex(format!("v{o}")));
    }
    inst
}

/// `ex:c0 -ex:next-> ex:c1 -> ... -> ex:c<len>`.
pub fn chain(len: usize) -> Instance {
    let mut inst = Instance::default();
    for i in 0..len {
        inst.add(ex(format!("c{i}")), ex("next"), ex(format!("c{}", i + 1)));
    }
    inst
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct QueryParams {
    /// Atoms in total, counting every step of a `/`-chain.
    pub max_atoms: usize,
    pub max_reach: usize,
}

impl Default for QueryParams {
    fn default() -> Self {
        QueryParams { max_atoms: 6, max_reach: 3 }
    }
}

/// A random connected query over the vertices and properties of a graph
/// made by [`random_graph`], as SPARQL text.
pub fn random_query(graph: GraphParams, params: QueryParams, rng: &mut impl Rng) -> String {
    let mut vars: Vec<String> = vec!["?v0".into()];
    let mut atoms_left = rng.gen_range(1..=params.max_atoms.max(1));
    let mut reach_left = rng.gen_range(0..=params.max_reach);
    let mut patterns = Vec::new();
    while atoms_left > 0 {
        let steps = if atoms_left >= 2 && rng.gen_bool(0.2) { 2 } else { 1 };
        atoms_left -= steps;
        let mut path = Vec::new();
        let mut reach_atoms = 0;
        for _ in 0..steps {
            let mut atom = String::new();
            if rng.gen_bool(0.25) {
                atom.push('^');
            }
            write!(atom, "ex:p{}", rng.gen_range(0..graph.properties.max(1))).unwrap();
            if reach_left > 0 && rng.gen_bool(0.5) {
                reach_left -= 1;
                reach_atoms += 1;
                atom.push(*['*', '+', '?'].choose(rng).unwrap());
            }
            path.push(atom);
        }
        let anchor = vars.choose(rng).unwrap().clone();
        let roll: f64 = rng.gen();
        let other = if roll < 0.15 {
            format!("ex:v{}", rng.gen_range(0..graph.vertices.max(2)))
        } else if roll < 0.4 && (vars.len() > 1 || !(steps == 1 && reach_atoms == 1)) {
            // reach patterns with identical endpoints are rejected
            let pool: Vec<&String> =
                vars.iter().filter(|v| !(steps == 1 && reach_atoms == 1 && **v == anchor)).collect();
            (*pool.choose(rng).unwrap()).clone()
        } else {
            let v = format!("?v{}", vars.len());
            vars.push(v.clone());
            v
        };
        let path = path.join("/");
        if rng.gen_bool(0.5) {
            patterns.push(format!("{anchor} {path} {other}"));
        } else {
            patterns.push(format!("{other} {path} {anchor}"));
        }
    }
    let select = if rng.gen_bool(0.5) {
        "*".to_string()
    } else {
        let mut chosen: Vec<&String> = vars.iter().filter(|_| rng.gen_bool(0.5)).collect();
        if chosen.is_empty() {
            chosen.push(&vars[0]);
        }
        chosen.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
    };
    format!("PREFIX ex: <{EX}>\nSELECT {select} WHERE {{\n  {} .\n}}\n", patterns.join(" .\n  "))
}

/// Seeded pair of graph and query.
pub fn random_case(seed: u64, graph: GraphParams, query: QueryParams) -> (Instance, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_graph(graph, &mut rng);
    let q = random_query(graph, query, &mut rng);
    (inst, q)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct HierarchyParams {
    pub universities: usize,
    pub departments: usize,
    /// Top-level research groups per department.
    pub groups: usize,
    /// Levels of sub-groups below each top-level group.
    pub subgroup_depth: usize,
    pub professors: usize,
    pub students: usize,
}

impl Default for HierarchyParams {
    fn default() -> Self {
        HierarchyParams { universities: 4, departments: 4, groups: 2, subgroup_depth: 2, professors: 4, students: 40 }
    }
}

impl HierarchyParams {
    /// Triples produced per university.
    pub fn triples_per_university(&self) -> usize {
        let groups = self.groups * (1 + self.subgroup_depth);
        let per_dept = 2 + groups * 2 + self.professors * 4 + self.students * 4;
        1 + self.departments * per_dept
    }

    /// Same shape, with the university count picked to give about
    /// `triples` triples.
    pub fn with_size(self, triples: usize) -> Self {
        HierarchyParams { universities: (triples / self.triples_per_university()).max(1), ..self }
    }
}

/// A university-style dataset: departments are sub-organisations of
/// universities, research groups of departments, and sub-groups of
/// groups, so `ub:subOrganizationOf` chains have depth `2 + subgroup_depth`.
pub fn hierarchy(params: HierarchyParams, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = Instance::default();
    let ty = Term::iri(RDF_TYPE);
    let ub = |local: &str| Term::iri(format!("{UB}{local}"));
    let sub_org = ub("subOrganizationOf");
    for u in 0..params.universities {
        let univ = ex(format!("univ{u}"));
        inst.add(univ.clone(), ty.clone(), ub("University"));
        for d in 0..params.departments {
            let dept = ex(format!("univ{u}/dept{d}"));
            inst.add(dept.clone(), ty.clone(), ub("Department"));
            inst.add(dept.clone(), sub_org.clone(), univ.clone());
            for g in 0..params.groups {
                let mut parent = dept.clone();
                for level in 0..=params.subgroup_depth {
                    let group = ex(format!("univ{u}/dept{d}/group{g}.{level}"));
                    inst.add(group.clone(), ty.clone(), ub("ResearchGroup"));
                    inst.add(group.clone(), sub_org.clone(), parent);
                    parent = group;
                }
            }
            for f in 0..params.professors {
                let prof = ex(format!("univ{u}/dept{d}/prof{f}"));
                let kind = if f == 0 { "FullProfessor" } else { "AssociateProfessor" };
                inst.add(prof.clone(), ty.clone(), ub(kind));
                inst.add(prof.clone(), ub("worksFor"), dept.clone());
                if f == 0 {
                    inst.add(prof.clone(), ub("headOf"), dept.clone());
                } else {
                    inst.add(prof.clone(), ub("name"), Term::plain_literal(&format!("Professor {u}.{d}.{f}")));
                }
                inst.add(prof, ub("doctoralDegreeFrom"), ex(format!("univ{}", rng.gen_range(0..params.universities))));
            }
            for s in 0..params.students {
                let student = ex(format!("univ{u}/dept{d}/student{s}"));
                inst.add(student.clone(), ty.clone(), ub("GraduateStudent"));
                inst.add(student.clone(), ub("memberOf"), dept.clone());
                let adv = rng.gen_range(0..params.professors.max(1));
                inst.add(student.clone(), ub("advisor"), ex(format!("univ{u}/dept{d}/prof{adv}")));
                let course = rng.gen_range(0..params.professors.max(1) * 2);
                inst.add(student, ub("takesCourse"), ex(format!("univ{u}/dept{d}/course{course}")));
            }
        }
    }
    inst
}

pub const UB_PREFIXES: &str = "PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>\n\
PREFIX ub: <http://www.lehigh.edu/~zhp2/2004/0401/univ-bench.owl#>\n";

/// Research groups below some university, with the university.
pub fn hierarchy_single_reach_query() -> String {
    format!(
        "{UB_PREFIXES}SELECT * WHERE {{ ?x rdf:type ub:ResearchGroup . ?x ub:subOrganizationOf* ?y . \
         ?y rdf:type ub:University . }}\n"
    )
}

/// Department heads and the universities above their departments.
pub fn hierarchy_selective_query() -> String {
    format!(
        "{UB_PREFIXES}SELECT * WHERE {{ ?x rdf:type ub:FullProfessor . ?x ub:headOf ?d . \
         ?d ub:subOrganizationOf* ?y . ?y rdf:type ub:University . }}\n"
    )
}

/// Pairs of research groups under the same university: two reach joins
/// and two equi-joins.
pub fn hierarchy_pair_query() -> String {
    format!(
        "{UB_PREFIXES}SELECT * WHERE {{ ?r1 rdf:type ub:ResearchGroup . ?r1 ub:subOrganizationOf* ?y . \
         ?y rdf:type ub:University . ?r2 rdf:type ub:ResearchGroup . ?r2 ub:subOrganizationOf* ?y . }}\n"
    )
}

/// Id of a term known to be in the dictionary.
pub fn id_of(inst: &Instance, term: &Term) -> TermId {
    inst.dict.lookup(term).unwrap_or(TermId::ABSENT)
}
