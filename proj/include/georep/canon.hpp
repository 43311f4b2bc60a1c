#pragma once

// Answer grammar, exact canonical forms and the three-valued equivalence
// verdict used by scoring.
//
// Grammar (whitespace-insensitive, explicit '*' required):
//
//   expr    := unary ( ('*' | '/') unary )*
//   unary   := '-' unary | primary
//   primary := integer | decimal | 'pi' | 'π'
//            | ('sqrt' | 'arccos' | 'arcsin' | 'arctan') '(' expr ')'
//            | '(' expr ')'
//   integer := [0-9]+
//   decimal := [0-9]+ '.' [0-9]+
//
// Canonical values are monomials coeff * sqrt(radicand) * pi^k * atoms, where
// atoms are irreducible function applications. A monomial without atoms and
// with k in {0, 1} is an Exact form; everything else is Opaque and compares
// structurally through its deterministic rendering.

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/miller_rabin.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "georep/core.hpp"

namespace georep::canon {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// ─── Syntax tree ──────────────────────────────────────────────────────────

enum class ExprKind : std::uint8_t { Integer, Decimal, Pi, Negate, Product, Fraction, Sqrt, Function };
enum class TrigFunction : std::uint8_t { Arccos, Arcsin, Arctan };

inline std::string_view function_name(TrigFunction f) {
    switch (f) {
        case TrigFunction::Arccos: return "arccos";
        case TrigFunction::Arcsin: return "arcsin";
        case TrigFunction::Arctan: return "arctan";
    }
    return "?";
}

struct AnswerExpr {
    ExprKind kind = ExprKind::Integer;
    std::string literal;  // digit string for Integer / Decimal
    TrigFunction function = TrigFunction::Arccos;
    std::vector<AnswerExpr> args;

    friend bool operator==(const AnswerExpr&, const AnswerExpr&) = default;

    static AnswerExpr integer(std::string digits) { return {ExprKind::Integer, std::move(digits), {}, {}}; }
    static AnswerExpr decimal(std::string digits) { return {ExprKind::Decimal, std::move(digits), {}, {}}; }
    static AnswerExpr pi() { return {ExprKind::Pi, {}, {}, {}}; }
    static AnswerExpr negate(AnswerExpr e) { return {ExprKind::Negate, {}, {}, {std::move(e)}}; }
    static AnswerExpr product(AnswerExpr a, AnswerExpr b) {
        return {ExprKind::Product, {}, {}, {std::move(a), std::move(b)}};
    }
    static AnswerExpr fraction(AnswerExpr a, AnswerExpr b) {
        return {ExprKind::Fraction, {}, {}, {std::move(a), std::move(b)}};
    }
    static AnswerExpr sqrt(AnswerExpr e) { return {ExprKind::Sqrt, {}, {}, {std::move(e)}}; }
    static AnswerExpr apply(TrigFunction f, AnswerExpr e) { return {ExprKind::Function, {}, f, {std::move(e)}}; }
};

// ─── Parser ───────────────────────────────────────────────────────────────

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    AnswerExpr parse() {
        skip_ws();
        if (pos_ == text_.size()) throw ParseError(pos_, "empty answer");
        AnswerExpr e = expr(0);
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected input");
        return e;
    }

private:
    static constexpr int kMaxDepth = 64;

    [[noreturn]] void fail(const std::string& what) const {
        std::string near;
        if (pos_ < text_.size()) near = " near '" + std::string(text_.substr(pos_, 8)) + "'";
        throw ParseError(pos_, what + near);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(std::string_view token) {
        skip_ws();
        if (text_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    AnswerExpr expr(int depth) {
        if (depth > kMaxDepth) fail("expression nested too deeply");
        AnswerExpr lhs = unary(depth);
        for (;;) {
            skip_ws();
            if (consume("*")) {
                lhs = AnswerExpr::product(std::move(lhs), unary(depth));
            } else if (consume("/")) {
                lhs = AnswerExpr::fraction(std::move(lhs), unary(depth));
            } else {
                return lhs;
            }
        }
    }

    AnswerExpr unary(int depth) {
        if (depth > kMaxDepth) fail("expression nested too deeply");
        if (consume("-")) return AnswerExpr::negate(unary(depth + 1));
        return primary(depth);
    }

    AnswerExpr primary(int depth) {
        skip_ws();
        if (pos_ == text_.size()) fail("unexpected end of answer");
        const char ch = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(ch))) return number();
        if (consume("(")) {
            AnswerExpr inner = expr(depth + 1);
            if (!consume(")")) fail("expected ')'");
            return inner;
        }
        if (consume("\xCF\x80")) return AnswerExpr::pi();  // UTF-8 'π'
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string_view word = text_.substr(start, pos_ - start);
            if (word == "pi") return AnswerExpr::pi();
            std::optional<TrigFunction> fn;
            if (word == "arccos") fn = TrigFunction::Arccos;
            if (word == "arcsin") fn = TrigFunction::Arcsin;
            if (word == "arctan") fn = TrigFunction::Arctan;
            if (word != "sqrt" && !fn) {
                pos_ = start;
                fail("unknown word");
            }
            if (!consume("(")) fail("expected '(' after function name");
            AnswerExpr arg = expr(depth + 1);
            if (!consume(")")) fail("expected ')'");
            return fn ? AnswerExpr::apply(*fn, std::move(arg)) : AnswerExpr::sqrt(std::move(arg));
        }
        fail("unexpected character");
    }

    AnswerExpr number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        bool is_decimal = false;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            const std::size_t frac = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ == frac) fail("expected digits after decimal point");
            is_decimal = true;
        }
        std::string digits(text_.substr(start, pos_ - start));
        return is_decimal ? AnswerExpr::decimal(std::move(digits)) : AnswerExpr::integer(std::move(digits));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses an answer string. Throws ParseError carrying the byte offset of
/// the first out-of-grammar character (units, prose, implicit products).
inline AnswerExpr parse_answer(std::string_view text) { return detail::Parser(text).parse(); }

// ─── Canonical forms ──────────────────────────────────────────────────────

struct Monomial;

// An irreducible factor: f(arg) or sqrt(arg) where arg did not reduce.
struct Atom {
    enum class Kind : std::uint8_t { Function, Root };
    Kind kind = Kind::Function;
    TrigFunction function = TrigFunction::Arccos;
    std::shared_ptr<const Monomial> arg;
    std::string key;  // rendered text; total order and identity for atoms
};

struct Monomial {
    Rational coeff{0};
    BigInt radicand{1};  // square-free, >= 1
    int pi_power = 0;
    std::vector<Atom> numer;  // sorted by key
    std::vector<Atom> denom;  // sorted by key
    bool decimal_origin = false;  // provenance only, ignored by equality

    bool is_zero() const { return coeff == 0; }
    bool has_atoms() const { return !numer.empty() || !denom.empty(); }
};

struct ExactForm {
    Rational coeff{0};
    BigInt radicand{1};
    int pi_power = 0;

    friend bool operator==(const ExactForm&, const ExactForm&) = default;
};

std::string render(const Monomial& m);

namespace detail {

inline Monomial zero_monomial(bool decimal_origin) {
    Monomial m;
    m.decimal_origin = decimal_origin;
    return m;
}

inline void sort_atoms(std::vector<Atom>& atoms) {
    std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.key < b.key; });
}

inline BigInt isqrt(const BigInt& n) { return boost::multiprecision::sqrt(n); }

inline constexpr std::uint64_t kTrialLimit = 100000;

// Fixed-seed Miller-Rabin so canonical forms never depend on run state.
inline bool is_probable_prime(const BigInt& n) {
    std::mt19937 gen(0x9e3779b9u);
    return boost::multiprecision::miller_rabin_test(n, 40, gen);
}

// Writes n = k^2 * s with s square-free. Returns false when n has a cofactor
// too large to classify by trial division up to kTrialLimit.
inline bool split_square(BigInt n, BigInt& k, BigInt& s) {
    k = 1;
    s = 1;
    if (n <= 1) {
        s = n;
        return true;
    }
    const BigInt u64_max = std::numeric_limits<std::uint64_t>::max();
    auto next = [](std::uint64_t d) { return d == 2 ? std::uint64_t{3} : d + 2; };
    std::uint64_t d = 2;
    while (n > u64_max && d <= kTrialLimit) {
        int mult = 0;
        while (n % d == 0) {
            n /= d;
            ++mult;
        }
        for (int i = 0; i + 1 < mult; i += 2) k *= d;
        if (mult % 2 == 1) s *= d;
        d = next(d);
    }
    if (n <= u64_max) {
        auto v = n.convert_to<std::uint64_t>();
        for (; d <= kTrialLimit && d * d <= v; d = next(d)) {
            int mult = 0;
            while (v % d == 0) {
                v /= d;
                ++mult;
            }
            for (int i = 0; i + 1 < mult; i += 2) k *= d;
            if (mult % 2 == 1) s *= d;
        }
        n = v;
    }
    if (n == 1) return true;
    if (BigInt(d) * d > n || is_probable_prime(n)) {  // remaining cofactor is prime
        s *= n;
        return true;
    }
    const BigInt root = isqrt(n);
    if (root * root == n && (root < BigInt(d) * d || is_probable_prime(root))) {
        k *= root;
        return true;
    }
    // No prime factor below d remains. Below d^3 a composite non-square
    // cofactor is p*q with p != q, hence square-free.
    if (n >= BigInt(d) * d * d) return false;
    s *= n;
    return true;
}

inline Atom make_atom(Atom::Kind kind, TrigFunction fn, Monomial arg) {
    Atom a;
    a.kind = kind;
    a.function = fn;
    const std::string inner = render(arg);
    a.key = (kind == Atom::Kind::Root ? std::string("sqrt") : std::string(function_name(fn))) + "(" + inner + ")";
    a.arg = std::make_shared<const Monomial>(std::move(arg));
    return a;
}

inline Monomial multiply(const Monomial& a, const Monomial& b) {
    const bool origin = a.decimal_origin || b.decimal_origin;
    if (a.is_zero() || b.is_zero()) return zero_monomial(origin);
    Monomial out;
    out.decimal_origin = origin;
    // sqrt(r1) * sqrt(r2) = g * sqrt((r1/g)(r2/g)) with g = gcd; the cofactor
    // stays square-free because r1/g and r2/g are coprime and square-free.
    const BigInt g = boost::multiprecision::gcd(a.radicand, b.radicand);
    out.coeff = a.coeff * b.coeff * Rational(g);
    out.radicand = (a.radicand / g) * (b.radicand / g);
    out.pi_power = a.pi_power + b.pi_power;
    out.numer = a.numer;
    out.numer.insert(out.numer.end(), b.numer.begin(), b.numer.end());
    out.denom = a.denom;
    out.denom.insert(out.denom.end(), b.denom.begin(), b.denom.end());
    sort_atoms(out.numer);
    sort_atoms(out.denom);
    return out;
}

inline Monomial divide(const Monomial& a, const Monomial& b) {
    if (b.is_zero()) throw DomainError("division by zero");
    const bool origin = a.decimal_origin || b.decimal_origin;
    if (a.is_zero()) return zero_monomial(origin);
    Monomial out;
    out.decimal_origin = origin;
    // sqrt(r1) / sqrt(r2) = sqrt(r1 r2) / r2, then reduce as in multiply.
    const BigInt g = boost::multiprecision::gcd(a.radicand, b.radicand);
    out.coeff = a.coeff / b.coeff * Rational(g, b.radicand);
    out.radicand = (a.radicand / g) * (b.radicand / g);
    out.pi_power = a.pi_power - b.pi_power;
    out.numer = a.numer;
    out.numer.insert(out.numer.end(), b.denom.begin(), b.denom.end());
    out.denom = a.denom;
    out.denom.insert(out.denom.end(), b.numer.begin(), b.numer.end());
    sort_atoms(out.numer);
    sort_atoms(out.denom);
    return out;
}

inline Monomial root_atom(const Monomial& m) {
    Monomial out;
    out.coeff = 1;
    out.decimal_origin = m.decimal_origin;
    out.numer.push_back(make_atom(Atom::Kind::Root, TrigFunction::Arccos, m));
    return out;
}

inline Monomial square_root(const Monomial& m) {
    if (m.is_zero()) return m;
    if (!m.has_atoms() && m.coeff < 0) throw DomainError("square root of a negative value");
    if (m.has_atoms() || m.radicand != 1 || m.pi_power % 2 != 0) return root_atom(m);
    // sqrt(p/q) = sqrt(p q) / q
    const BigInt p = boost::multiprecision::numerator(m.coeff);
    const BigInt q = boost::multiprecision::denominator(m.coeff);
    BigInt k, s;
    if (!split_square(p * q, k, s)) return root_atom(m);
    Monomial out;
    out.decimal_origin = m.decimal_origin;
    out.coeff = Rational(k, q);
    out.radicand = s;
    out.pi_power = m.pi_power / 2;
    return out;
}

inline Monomial apply_function(TrigFunction fn, const Monomial& arg) {
    if (fn != TrigFunction::Arctan && !arg.has_atoms()) {
        bool outside = false;
        if (arg.pi_power == 0) {
            outside = arg.coeff * arg.coeff * Rational(arg.radicand) > 1;
        } else {
            const long double v = boost::multiprecision::abs(arg.coeff).convert_to<long double>() *
                                  std::sqrt(arg.radicand.convert_to<long double>()) *
                                  std::pow(std::numbers::pi_v<long double>, arg.pi_power);
            outside = v > 1.0L;
        }
        if (outside) throw DomainError(std::string(function_name(fn)) + " argument outside [-1, 1]");
    }
    Monomial out;
    out.coeff = 1;
    out.decimal_origin = arg.decimal_origin;
    out.numer.push_back(make_atom(Atom::Kind::Function, fn, arg));
    return out;
}

// Base-10 digit string to integer. cpp_int's string constructor treats a
// leading zero as an octal prefix, so zeros are stripped first.
inline BigInt decimal_integer(std::string_view digits) {
    const auto first = digits.find_first_not_of('0');
    if (first == std::string_view::npos) return 0;
    return BigInt(std::string(digits.substr(first)));
}

inline Rational decimal_to_rational(const std::string& digits) {
    const auto dot = digits.find('.');
    if (dot == std::string::npos) return Rational(decimal_integer(digits));
    const std::string whole = digits.substr(0, dot) + digits.substr(dot + 1);
    BigInt scale = 1;
    for (std::size_t i = dot + 1; i < digits.size(); ++i) scale *= 10;
    return Rational(decimal_integer(whole), scale);
}

inline Monomial fold(const AnswerExpr& e) {
    switch (e.kind) {
        case ExprKind::Integer: {
            Monomial m;
            m.coeff = Rational(decimal_integer(e.literal));
            return m;
        }
        case ExprKind::Decimal: {
            Monomial m;
            m.coeff = decimal_to_rational(e.literal);
            m.decimal_origin = true;
            return m;
        }
        case ExprKind::Pi: {
            Monomial m;
            m.coeff = 1;
            m.pi_power = 1;
            return m;
        }
        case ExprKind::Negate: {
            Monomial m = fold(e.args.at(0));
            m.coeff = -m.coeff;
            return m;
        }
        case ExprKind::Product: return multiply(fold(e.args.at(0)), fold(e.args.at(1)));
        case ExprKind::Fraction: return divide(fold(e.args.at(0)), fold(e.args.at(1)));
        case ExprKind::Sqrt: return square_root(fold(e.args.at(0)));
        case ExprKind::Function: return apply_function(e.function, fold(e.args.at(0)));
    }
    throw DomainError("unknown expression node");
}

inline std::string rational_text(const Rational& r) {
    const BigInt num = boost::multiprecision::numerator(r);
    const BigInt den = boost::multiprecision::denominator(r);
    return den == 1 ? num.str() : num.str() + "/" + den.str();
}

inline long double to_long_double(const Monomial& m);

inline long double atom_value(const Atom& a) {
    const long double x = to_long_double(*a.arg);
    if (a.kind == Atom::Kind::Root) return std::sqrt(x);
    switch (a.function) {
        case TrigFunction::Arccos: return std::acos(x);
        case TrigFunction::Arcsin: return std::asin(x);
        case TrigFunction::Arctan: return std::atan(x);
    }
    return std::numeric_limits<long double>::quiet_NaN();
}

inline long double to_long_double(const Monomial& m) {
    long double v = m.coeff.convert_to<long double>();
    if (m.radicand != 1) v *= std::sqrt(m.radicand.convert_to<long double>());
    if (m.pi_power != 0) v *= std::pow(std::numbers::pi_v<long double>, m.pi_power);
    for (const auto& a : m.numer) v *= atom_value(a);
    for (const auto& a : m.denom) v /= atom_value(a);
    return v;
}

}  // namespace detail

/// Deterministic text for a canonical monomial: coefficient, then
/// "*sqrt(r)", then "*pi" factors, then atoms; divisors follow as "/x".
/// The result is itself in the grammar and re-canonicalizes to the same form.
inline std::string render(const Monomial& m) {
    if (m.is_zero()) return "0";
    std::vector<std::string> factors;
    if (m.radicand != 1) factors.push_back("sqrt(" + m.radicand.str() + ")");
    for (int i = 0; i < m.pi_power; ++i) factors.emplace_back("pi");
    for (const auto& a : m.numer) factors.push_back(a.key);
    std::vector<std::string> divisors;
    for (int i = 0; i > m.pi_power; --i) divisors.emplace_back("pi");
    for (const auto& a : m.denom) divisors.push_back(a.key);

    std::string out;
    const bool negative = m.coeff < 0;
    const Rational magnitude = negative ? Rational(-m.coeff) : m.coeff;
    if (factors.empty() || magnitude != 1) {
        out = detail::rational_text(m.coeff);
        for (const auto& f : factors) out += "*" + f;
    } else {
        out = negative ? "-" : "";
        for (std::size_t i = 0; i < factors.size(); ++i) out += (i ? "*" : "") + factors[i];
    }
    for (const auto& d : divisors) out += "/" + d;
    return out;
}

class CanonicalForm {
public:
    CanonicalForm() = default;
    explicit CanonicalForm(Monomial m) : term_(std::move(m)) {}

    static CanonicalForm exact(Rational coeff, BigInt radicand = 1, int pi_power = 0) {
        Monomial m;
        m.coeff = std::move(coeff);
        m.radicand = std::move(radicand);
        m.pi_power = pi_power;
        if (m.coeff == 0) {
            m.radicand = 1;
            m.pi_power = 0;
        }
        return CanonicalForm(std::move(m));
    }

    bool is_exact() const { return !term_.has_atoms() && (term_.pi_power == 0 || term_.pi_power == 1); }
    bool is_opaque() const { return !is_exact(); }
    bool decimal_origin() const { return term_.decimal_origin; }

    // Valid only when is_exact().
    ExactForm exact_form() const { return {term_.coeff, term_.radicand, term_.pi_power}; }

    const Monomial& term() const { return term_; }
    std::string render() const { return canon::render(term_); }
    long double value() const { return detail::to_long_double(term_); }

    friend bool operator==(const CanonicalForm& a, const CanonicalForm& b) {
        if (a.is_exact() != b.is_exact()) return false;
        if (a.is_exact()) return a.exact_form() == b.exact_form();
        return a.render() == b.render();
    }

private:
    Monomial term_;
};

/// Exact arithmetic throughout. Throws DomainError for square roots of
/// negative exact values, division by exact zero, or arccos/arcsin outside
/// [-1, 1].
inline CanonicalForm canonicalize(const AnswerExpr& e) { return CanonicalForm(detail::fold(e)); }

inline std::string render(const CanonicalForm& c) { return c.render(); }

// ─── Equivalence ──────────────────────────────────────────────────────────

enum class TriageReason : std::uint8_t { OpaqueVsExact, DecimalApproximation, Unparseable };

inline std::string_view to_string(TriageReason r) {
    switch (r) {
        case TriageReason::OpaqueVsExact: return "opaque-vs-exact";
        case TriageReason::DecimalApproximation: return "decimal-approximation";
        case TriageReason::Unparseable: return "unparseable";
    }
    return "?";
}

inline std::optional<TriageReason> triage_reason_from_string(std::string_view s) {
    if (s == "opaque-vs-exact") return TriageReason::OpaqueVsExact;
    if (s == "decimal-approximation") return TriageReason::DecimalApproximation;
    if (s == "unparseable") return TriageReason::Unparseable;
    return std::nullopt;
}

struct EquivalenceVerdict {
    enum class Kind : std::uint8_t { Equal, NotEqual, NeedsAdjudication };
    Kind kind = Kind::NotEqual;
    std::optional<TriageReason> reason;  // set iff NeedsAdjudication

    static EquivalenceVerdict equal() { return {Kind::Equal, std::nullopt}; }
    static EquivalenceVerdict not_equal() { return {Kind::NotEqual, std::nullopt}; }
    static EquivalenceVerdict needs(TriageReason r) { return {Kind::NeedsAdjudication, r}; }

    bool is_equal() const { return kind == Kind::Equal; }
    bool needs_adjudication() const { return kind == Kind::NeedsAdjudication; }

    friend bool operator==(const EquivalenceVerdict&, const EquivalenceVerdict&) = default;
};

// Relative-error trigger for routing near misses to a human. It never
// produces Equal on its own.
inline constexpr long double kTriageRelativeError = 1e-3L;

inline bool numerically_close(long double a, long double b, long double rel = kTriageRelativeError) {
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    const long double scale = std::max(std::fabs(a), std::fabs(b));
    return std::fabs(a - b) <= rel * scale;
}

inline EquivalenceVerdict equivalent(const CanonicalForm& a, const CanonicalForm& b) {
    if (a.is_exact() && b.is_exact()) {
        if (a.exact_form() == b.exact_form()) return EquivalenceVerdict::equal();
        if ((a.decimal_origin() || b.decimal_origin()) && numerically_close(a.value(), b.value())) {
            return EquivalenceVerdict::needs(TriageReason::DecimalApproximation);
        }
        return EquivalenceVerdict::not_equal();
    }
    if (a.is_exact() != b.is_exact()) return EquivalenceVerdict::needs(TriageReason::OpaqueVsExact);
    if (a.render() == b.render()) return EquivalenceVerdict::equal();
    // Distinct opaque forms that agree numerically (trig identities and the
    // like) go to a human instead of being declared different.
    if (numerically_close(a.value(), b.value())) return EquivalenceVerdict::needs(TriageReason::OpaqueVsExact);
    return EquivalenceVerdict::not_equal();
}

inline std::optional<CanonicalForm> try_canonicalize(std::string_view text) {
    try {
        return canonicalize(parse_answer(text));
    } catch (const ParseError&) {
        return std::nullopt;
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

/// Three-valued comparison of two answer strings; never throws.
inline EquivalenceVerdict equivalent(std::string_view a, std::string_view b) {
    const auto ca = try_canonicalize(a);
    const auto cb = try_canonicalize(b);
    if (!ca || !cb) return EquivalenceVerdict::needs(TriageReason::Unparseable);
    return equivalent(*ca, *cb);
}

}  // namespace georep::canon
