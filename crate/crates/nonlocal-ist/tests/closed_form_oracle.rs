//! Closed forms against values frozen from an independent evaluation of the
//! reflectionless reconstruction (separate code path, double precision).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use nonlocal_ist::closed_form::{make, Family, SolutionId};
use nonlocal_ist::C64;

const PTS: [(f64, f64); 2] = [(0.37, 0.21), (-1.3, 0.5)];

fn frozen() -> Vec<(&'static str, [f64; 4])> {
    vec![
        ("sinh-dark1", [7.33753705558936486e-01, 1.35453481642475992e+00, 1.66537628475106403e+00, -9.62621198334435380e-01]),
        ("sinh-bright1", [4.44347932275439006e-01, 2.71233933124931381e+00, 1.75287075115628954e+00, -1.12277874480698325e+00]),
        ("sine-dark1", [-6.77797003397384579e-02, 1.75651038444832031e+00, -1.61544624841503648e+00, 1.09113906932437121e+00]),
        ("sine-bright1", [2.90043869870286652e+00, 2.38916370948180523e+00, -1.81140260832909972e+00, 9.84087622002592033e-01]),
        ("sinh-two+-", [-4.17712500331209935e-01, 2.26458504799423155e+00, -9.63001453486124426e-01, 1.88746830614977523e+00]),
        ("sinh-two-+", [-4.10845362107406187e-01, -4.08140925395654386e-01, -9.52561497370727595e-01, 1.55466970538790816e+00]),
        ("sinh-two++", [-2.51222552560261769e-01, -5.54002756299296184e-01, -1.12990269834291346e+00, 2.09510854789676326e+00]),
        ("sinh-two--", [-1.14066732698259310e+00, 4.36522544345884711e+00, -8.16173329181788976e-01, 1.40237163048683722e+00]),
        ("sine-two+-", [-4.08140925395654441e-01, 4.10845362107406076e-01, 1.55466970538790816e+00, 9.52561497370727706e-01]),
        ("sine-two-+", [2.26458504799423155e+00, 4.17712500331210213e-01, 1.88746830614977501e+00, 9.63001453486124537e-01]),
        ("sine-two++", [4.36522544345884711e+00, 1.14066732698259354e+00, 1.40237163048683722e+00, 8.16173329181789087e-01]),
        ("sine-two--", [-5.54002756299296184e-01, 2.51222552560261547e-01, 2.09510854789676326e+00, 1.12990269834291368e+00]),
        ("nls1-dark", [3.97480768030713527e-02, 1.01035046724097910e+00, -1.96355573401772299e+00, 3.74557009930993390e-01]),
        ("nls1-sing", [1.98215546184889355e+01, 3.17922486188342113e+00, -1.96537288381055841e+00, 3.76126466133376969e-01]),
        ("nls3-dark", [-1.80887753355078051e+00, 6.06051716457464584e-01, 1.04476534414765787e+00, -1.44018813625522557e+00]),
        ("nls3-sing", [-1.85803743206653937e+00, 1.05442789003849513e+00, -2.95050354660195135e-01, -2.99145526676103080e+00]),
        ("nls2+-", [1.87020354969070413e+00, -1.54851031690368712e+00, -1.25641452189647684e+00, -1.36204103096630447e+00]),
        ("nls2-+", [2.11624098710401887e+00, 1.22849969469504661e+00, -1.69006543695116851e+00, -1.26972022714932375e+00]),
        ("nls2++", [2.44294679388999514e+00, 1.27563518395653552e-01, -1.19451332627614759e+00, -1.16363598828984194e+00]),
        ("nls2--", [2.46332405254097253e+00, -5.34900918715024432e-01, -1.79915376938049421e+00, -1.50956691893489658e+00]),
        ("nls4+-", [1.22849969469504661e+00, -2.11624098710401887e+00, -1.26972022714932398e+00, 1.69006543695116829e+00]),
        ("nls4-+", [-1.54851031690368690e+00, -1.87020354969070413e+00, -1.36204103096630424e+00, 1.25641452189647640e+00]),
        ("nls4++", [-5.34900918715024210e-01, -2.46332405254097253e+00, -1.50956691893489681e+00, 1.79915376938049398e+00]),
        ("nls4--", [1.27563518395653719e-01, -2.44294679388999514e+00, -1.16363598828984194e+00, 1.19451332627614737e+00]),
        ("spatial-sinh", [3.23490812059123056e-01, 1.57400035755156642e+00, 2.82318161817528779e-01, -1.85916405640862759e+00]),
        ("spatial-sine", [-5.07138548555284840e-01, 1.68474445641470028e+00, -1.25472230661970663e-01, 1.94310843760016527e+00]),
    ]
}

fn id_for(name: &str) -> SolutionId {
    let two = |f, tag: &str| {
        let d = |c| if c == '+' { 1 } else { -1 };
        let mut ch = tag.chars();
        SolutionId::two(f, d(ch.next().unwrap()), d(ch.next().unwrap()), 3.0)
    };
    match name {
        "sinh-dark1" => SolutionId::one(Family::SinhDark1),
        "sinh-bright1" => SolutionId::one(Family::SinhBright1Singular),
        "sine-dark1" => SolutionId::one(Family::SineDark1),
        "sine-bright1" => SolutionId::one(Family::SineBright1Singular),
        "nls1-dark" => SolutionId::one(Family::NlsCase1Dark),
        "nls1-sing" => SolutionId::one(Family::NlsCase1Singular),
        "nls3-dark" => SolutionId::one(Family::NlsCase3Dark),
        "nls3-sing" => SolutionId::one(Family::NlsCase3Singular),
        "spatial-sinh" => SolutionId::one(Family::SpatialBcSinh),
        "spatial-sine" => SolutionId::one(Family::SpatialBcSine),
        n if n.starts_with("sinh-two") => two(Family::SinhTwoSoliton, &n[8..]),
        n if n.starts_with("sine-two") => two(Family::SineTwoSoliton, &n[8..]),
        n if n.starts_with("nls2") => two(Family::NlsCase2Two, &n[4..]),
        n if n.starts_with("nls4") => two(Family::NlsCase4Two, &n[4..]),
        _ => unreachable!(),
    }
}

#[test]
fn closed_forms_match_frozen_reconstruction() {
    for (name, v) in frozen() {
        let id = id_for(name);
        let th = id.family.fixed_theta().unwrap_or(FRAC_PI_3);
        let beta = if name.starts_with("spatial") { 0.7 } else { 0.0 };
        let spec = id.spec(2.0, th, 1.0, beta);
        let sol = make(&id, &spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        for (i, &(x, t)) in PTS.iter().enumerate() {
            let want = C64::new(v[2 * i], v[2 * i + 1]);
            let got = sol.eval_q(x, t);
            assert!((got - want).norm() < 1e-12 * want.norm().max(1.0), "{name} at ({x},{t}): {got} vs {want}");
        }
    }
}

#[test]
fn two_soliton_specs_use_fixed_phases() {
    let id = SolutionId::two(Family::SinhTwoSoliton, 1, -1, 3.0);
    assert_eq!(id.spec(2.0, 0.1, 1.0, 0.0).theta_plus, FRAC_PI_2);
}
