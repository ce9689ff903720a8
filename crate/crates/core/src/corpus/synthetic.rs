//! Templated Python snippets for fixtures, demos and benchmarks.
//!
//! Vulnerable snippets follow the classic unsafe idiom for each class (string
//! formatting into SQL, `shell=True`, `eval`, unchecked redirects, ...); safe
//! snippets use the parameterized or validated counterpart. Names and filler
//! statements vary with the seed so that no two snippets are identical.

use super::{LabeledSample, VulnClass};
use crate::lexer::{Token, TokenKind, TokenStream};
use crate::numerics::Rng;

const NAMES: &[&str] = &[
    "user", "name", "item", "query", "value", "record", "path", "target", "data", "key", "page",
    "token", "account", "order", "report", "entry",
];

const FILLER: &[&str] = &[
    "logger.debug(\"handling request\")",
    "count = len(items)",
    "if not items:\n        return None",
    "result = []",
    "config = load_config()",
    "start = time.time()",
    "for row in rows:\n        result.append(row)",
    "timeout = settings.TIMEOUT",
];

fn templates(class: VulnClass, vulnerable: bool) -> &'static [&'static str] {
    use VulnClass::*;
    match (class, vulnerable) {
        (SqlInjection, true) => &[
            "cursor.execute(\"SELECT * FROM users WHERE {a} = '%s'\" % {b})",
            "cursor.execute(\"DELETE FROM items WHERE id = \" + {b})",
            "db.execute(f\"UPDATE accounts SET {a} = {{{b}}}\")",
        ],
        (SqlInjection, false) => &[
            "cursor.execute(\"SELECT * FROM users WHERE {a} = %s\", ({b},))",
            "cursor.execute(\"DELETE FROM items WHERE id = ?\", [{b}])",
            "session.query(User).filter(User.{a} == {b}).first()",
        ],
        (Xss, true) => &[
            "return HttpResponse(\"<p>\" + request.GET[\"{a}\"] + \"</p>\")",
            "return Markup(\"<div>%s</div>\" % {b})",
            "html = \"<span>{{}}</span>\".format(request.args.get(\"{a}\"))\n    return html",
        ],
        (Xss, false) => &[
            "return HttpResponse(\"<p>\" + escape(request.GET[\"{a}\"]) + \"</p>\")",
            "return render_template(\"page.html\", {a}={b})",
            "html = \"<span>{{}}</span>\".format(escape(request.args.get(\"{a}\")))\n    return html",
        ],
        (CommandInjection, true) => &[
            "subprocess.call(\"ls \" + {b}, shell=True)",
            "os.system(\"convert %s out.png\" % {b})",
            "os.popen(\"ping -c 1 \" + request.args[\"{a}\"]).read()",
        ],
        (CommandInjection, false) => &[
            "subprocess.call([\"ls\", {b}])",
            "subprocess.run([\"convert\", {b}, \"out.png\"], check=True)",
            "subprocess.run([\"ping\", \"-c\", \"1\", shlex.quote({b})])",
        ],
        (Xsrf, true) => &[
            "@csrf_exempt\ndef {a}_view(request):\n    {b}.save()",
            "app.config[\"WTF_CSRF_ENABLED\"] = False",
            "@csrf_exempt\ndef update_{a}(request):\n    return redirect(\"/\")",
        ],
        (Xsrf, false) => &[
            "@csrf_protect\ndef {a}_view(request):\n    {b}.save()",
            "app.config[\"WTF_CSRF_ENABLED\"] = True",
            "@require_POST\ndef update_{a}(request):\n    return redirect(\"/\")",
        ],
        (RemoteCodeExecution, true) => &[
            "result = eval(request.args.get(\"{a}\"))",
            "exec({b})",
            "obj = pickle.loads(request.data)",
        ],
        (RemoteCodeExecution, false) => &[
            "result = ast.literal_eval(request.args.get(\"{a}\"))",
            "result = int({b})",
            "obj = json.loads(request.data)",
        ],
        (PathDisclosure, true) => &[
            "return open(os.path.join(BASE, request.args[\"{a}\"])).read()",
            "return send_file(request.GET[\"{a}\"])",
            "except Exception as e:\n        return str(e), 500",
        ],
        (PathDisclosure, false) => &[
            "return send_from_directory(BASE, secure_filename({b}))",
            "return safe_join(BASE, {b})",
            "except Exception:\n        return \"internal error\", 500",
        ],
        (OpenRedirect, true) => &[
            "return redirect(request.args.get(\"{a}\"))",
            "return HttpResponseRedirect(request.GET[\"next\"])",
            "target = request.values.get(\"{a}\")\n    return redirect(target)",
        ],
        (OpenRedirect, false) => &[
            "return redirect(url_for(\"{a}\"))",
            "if is_safe_url({b}, allowed_hosts):\n        return redirect({b})",
            "return redirect(\"/home\")",
        ],
    }
}

/// One snippet of the given class and label.
pub fn snippet(class: VulnClass, vulnerable: bool, rng: &mut Rng) -> String {
    let pick = |rng: &mut Rng, xs: &[&'static str]| xs[rng.below(xs.len())];
    let a = pick(rng, NAMES);
    let b = pick(rng, NAMES);
    let body = pick(rng, templates(class, vulnerable))
        .replace("{a}", a)
        .replace("{b}", b)
        .replace("{{", "{")
        .replace("}}", "}");

    // Decorated templates and module-level settings stand on their own.
    if body.starts_with('@') || body.starts_with("app.") {
        return format!("{body}\n");
    }
    let mut out = format!("def handle_{a}(request, {b}):\n");
    for _ in 0..rng.below(3) {
        out.push_str(&format!("    {}\n", pick(rng, FILLER)));
    }
    if body.starts_with("except") {
        out.push_str(&format!("    try:\n        do_{a}({b})\n    {body}\n"));
    } else {
        out.push_str(&format!("    {body}\n"));
    }
    if rng.bernoulli(0.3) {
        out.push_str("    # done\n");
    }
    out
}

/// `n` samples alternating between labels, starting with a vulnerable one.
pub fn generate(class: VulnClass, n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let vulnerable = i % 2 == 0;
            LabeledSample {
                id: format!("{class}-{i:04}"),
                code: snippet(class, vulnerable, &mut rng),
                label: vulnerable as u8,
                vuln_class: class,
                origin: Some(format!("synthetic:{seed}")),
            }
        })
        .collect()
}

/// Identifier whose presence decides the label in [`designated_token_task`].
pub const DESIGNATED_TOKEN: &str = "eval";

/// `n` small functions of filler statements, alternating labels. Positives
/// also call [`DESIGNATED_TOKEN`] at a random line; negatives never mention
/// it, so the label is exactly the token's presence.
pub fn designated_token_task(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let vulnerable = i % 2 == 0;
            let a = NAMES[rng.below(NAMES.len())];
            let mut lines: Vec<String> = (0..2 + rng.below(3))
                .map(|_| FILLER[rng.below(FILLER.len())].to_string())
                .collect();
            if vulnerable {
                let at = rng.below(lines.len() + 1);
                lines.insert(at, format!("{DESIGNATED_TOKEN}({a})"));
            }
            let mut code = format!("def run_{a}({a}):\n");
            for line in lines {
                code.push_str(&format!("    {line}\n"));
            }
            LabeledSample {
                id: format!("designated-{i:04}"),
                code,
                label: vulnerable as u8,
                vuln_class: VulnClass::RemoteCodeExecution,
                origin: Some(format!("synthetic:{seed}")),
            }
        })
        .collect()
}

/// Token streams over two disjoint vocabularies `a0..a{k-1}` and
/// `b0..b{k-1}`. Each stream draws `len` tokens uniformly from one clique,
/// alternating between the cliques, so tokens only co-occur within their own
/// clique. Returns the streams and the two cliques.
pub fn two_cliques(streams: usize, len: usize, k: usize, seed: u64) -> (Vec<TokenStream>, [Vec<String>; 2]) {
    let cliques = ["a", "b"].map(|p| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>());
    let mut rng = Rng::new(seed);
    let corpus = (0..streams)
        .map(|s| {
            let clique = &cliques[s % 2];
            TokenStream {
                tokens: (0..len)
                    .map(|_| Token::new(TokenKind::Identifier, clique[rng.below(k)].clone()))
                    .collect(),
                source_id: format!("clique-{s}"),
            }
        })
        .collect();
    (corpus, cliques)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = generate(VulnClass::SqlInjection, 20, 4);
        assert_eq!(a, generate(VulnClass::SqlInjection, 20, 4));
        assert_eq!(a.iter().filter(|s| s.label == 1).count(), 10);
        assert!(a.iter().all(|s| !s.code.is_empty()));
    }

    #[test]
    fn every_class_generates() {
        for class in VulnClass::ALL {
            let s = generate(class, 6, 1);
            assert!(s.iter().all(|x| x.vuln_class == class && x.code.ends_with('\n')));
        }
    }

    #[test]
    fn designated_token_decides_the_label() {
        let task = designated_token_task(60, 1);
        assert_eq!(task.len(), 60);
        for s in &task {
            let stream = crate::lexer::tokenize(&s.code);
            let present = stream.lexemes().any(|l| l == DESIGNATED_TOKEN);
            assert_eq!(present, s.label == 1, "{}", s.code);
        }
        assert_eq!(task, designated_token_task(60, 1));
    }

    #[test]
    fn cliques_are_disjoint() {
        let (corpus, cliques) = two_cliques(10, 8, 3, 2);
        for (i, stream) in corpus.iter().enumerate() {
            assert_eq!(stream.len(), 8);
            assert!(stream.lexemes().all(|l| cliques[i % 2].iter().any(|c| c == l)));
        }
    }
}
