#include "brt/puzzle.hpp"

#include "brt/error.hpp"
#include "brt/random.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace brt {

using nlohmann::json;

Literal::Literal(int variable_, bool positive_) : variable(variable_), positive(positive_)
{
    if (variable < 0 || variable >= kNumVariables) {
        throw DomainError("literal variable " + std::to_string(variable) + " out of range");
    }
}

Clause::Clause(Literal first_, Literal second_) : first(first_), second(second_)
{
    if (first.variable == second.variable) {
        throw DomainError("clause literals must use distinct variables");
    }
}

Assignment::Assignment(int index) : index_(index)
{
    if (index < 0 || index >= kNumAssignments) {
        throw DomainError("assignment index " + std::to_string(index) + " out of range");
    }
}

Assignment Assignment::from_bits(bool a, bool b, bool c)
{
    return Assignment((a ? 1 : 0) | (b ? 2 : 0) | (c ? 4 : 0));
}

Assignment Assignment::parse(const std::string& text)
{
    if (text.size() != kNumVariables) throw DomainError("assignment must have 3 letters: " + text);
    std::array<bool, kNumVariables> bits{};
    for (int i = 0; i < kNumVariables; ++i) {
        if (text[i] == 'T') bits[i] = true;
        else if (text[i] == 'F') bits[i] = false;
        else throw DomainError("assignment letters must be T or F: " + text);
    }
    return from_bits(bits[0], bits[1], bits[2]);
}

std::string Assignment::str() const
{
    std::string s(kNumVariables, 'F');
    for (int i = 0; i < kNumVariables; ++i) {
        if (value(i)) s[i] = 'T';
    }
    return s;
}

void DisplayArrangement::validate() const
{
    std::array<int, kNumClauses> sorted = positions;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < kNumClauses; ++i) {
        if (sorted[i] != i) throw DomainError("arrangement is not a permutation of 0..5");
    }
}

bool clause_satisfied(const Clause& clause, Assignment a)
{
    return a.value(clause.first.variable) == clause.first.positive ||
           a.value(clause.second.variable) == clause.second.positive;
}

int count_satisfied(const Formula& formula, Assignment a)
{
    return static_cast<int>(std::count_if(formula.clauses.begin(), formula.clauses.end(),
                                          [a](const Clause& c) { return clause_satisfied(c, a); }));
}

std::vector<Assignment> enumerate_solutions(const Formula& formula)
{
    std::vector<Assignment> out;
    for (int i = 0; i < kNumAssignments; ++i) {
        if (count_satisfied(formula, Assignment(i)) == kNumClauses) out.emplace_back(i);
    }
    return out;
}

std::vector<Clause> clause_family()
{
    std::vector<Clause> family;
    for (int a = 0; a < kNumVariables; ++a) {
        for (int b = a + 1; b < kNumVariables; ++b) {
            for (int polarity = 0; polarity < 4; ++polarity) {
                family.emplace_back(Literal(a, (polarity & 1) == 0), Literal(b, (polarity & 2) == 0));
            }
        }
    }
    return family;
}

Formula polarity_inversion(const Formula& formula)
{
    Formula out = formula;
    for (Clause& c : out.clauses) {
        c.first.positive = !c.first.positive;
        c.second.positive = !c.second.positive;
    }
    return out;
}

Formula generate_puzzle(std::uint64_t seed, std::optional<Assignment> target)
{
    static const std::vector<Clause> family = clause_family();
    Rng rng(seed);
    const Assignment want = target ? *target : Assignment(static_cast<int>(rng.below(kNumAssignments)));
    Formula f;
    for (;;) {
        for (Clause& c : f.clauses) c = family[rng.below(family.size())];
        const auto solutions = enumerate_solutions(f);
        if (solutions.size() == 1 && solutions.front() == want) return f;
    }
}

DisplayArrangement arrangement_for_trial(std::uint64_t seed)
{
    Rng rng(seed);
    DisplayArrangement arr;
    std::iota(arr.positions.begin(), arr.positions.end(), 0);
    for (int i = kNumClauses - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(arr.positions[i], arr.positions[j]);
    }
    return arr;
}

const PuzzleEntry* PuzzleFixture::find(int id) const
{
    for (const auto& p : puzzles) {
        if (p.formula.id == id) return &p;
    }
    return nullptr;
}

const PuzzleEntry& PuzzleFixture::at(int id) const
{
    const PuzzleEntry* p = find(id);
    if (!p) throw ConfigError("stimulus " + std::to_string(id) + " not in puzzle fixture");
    return *p;
}

std::optional<int> PuzzleFixture::control_id() const
{
    for (const auto& p : puzzles) {
        if (p.control) return p.formula.id;
    }
    return std::nullopt;
}

std::vector<int> PuzzleFixture::ids() const
{
    std::vector<int> out;
    for (const auto& p : puzzles) out.push_back(p.formula.id);
    return out;
}

void PuzzleFixture::validate() const
{
    if (puzzles.empty()) throw ValidationError("puzzle fixture is empty");
    std::set<int> seen;
    for (const auto& p : puzzles) {
        const std::string where = "puzzle " + std::to_string(p.formula.id);
        if (!seen.insert(p.formula.id).second) throw ValidationError(where + ": duplicate id");
        const auto sols = enumerate_solutions(p.formula);
        if (sols.size() != 1) {
            throw ValidationError(where + ": has " + std::to_string(sols.size()) + " solutions, expected 1");
        }
        if (sols.front() != p.solution) throw ValidationError(where + ": solution field does not match");
        if (!(p.weight >= 0.0)) throw ValidationError(where + ": negative weight");
    }
}

PuzzleFixture generate_stimulus_set(int count, std::uint64_t seed)
{
    if (count < 2) throw ConfigError("stimulus set needs at least 2 puzzles (trained + control)");
    if (count > kNumAssignments) throw ConfigError("at most 8 puzzles with distinct solutions");
    const int trained = count - 1;

    // Default weights: the first puzzle dominates (3:1 against each other one).
    Rng rng(seed);
    PuzzleFixture fx;
    std::set<int> used;
    for (int i = 0; i < trained; ++i) {
        for (;;) {
            const Assignment target(static_cast<int>(rng.below(kNumAssignments)));
            // The control's solution (complement of puzzle 1's) must stay free.
            if (used.count(target.index()) ||
                (i > 0 && target == fx.puzzles.front().solution.complement())) {
                continue;
            }
            Formula f = generate_puzzle(rng.next(), target);
            f.id = i + 1;
            used.insert(target.index());
            fx.puzzles.push_back({f, target, i == 0 ? 3.0 : 1.0, false});
            break;
        }
    }
    const auto dominant = std::max_element(fx.puzzles.begin(), fx.puzzles.end(),
                                           [](const PuzzleEntry& a, const PuzzleEntry& b) {
                                               return a.weight < b.weight;
                                           });
    Formula control = polarity_inversion(dominant->formula);
    control.id = count;
    fx.puzzles.push_back({control, dominant->solution.complement(), 0.0, true});
    fx.validate();
    return fx;
}

namespace {

json formula_clauses(const Formula& f)
{
    json clauses = json::array();
    for (const Clause& c : f.clauses) {
        clauses.push_back({{c.first.variable, c.first.positive}, {c.second.variable, c.second.positive}});
    }
    return clauses;
}

Literal parse_literal(const json& j)
{
    if (!j.is_array() || j.size() != 2) throw ValidationError("literal must be [variable, polarity]");
    return Literal(j.at(0).get<int>(), j.at(1).get<bool>());
}

} // namespace

std::string fixture_to_json(const PuzzleFixture& fixture)
{
    json j;
    j["schema"] = kPuzzleSchema;
    j["puzzles"] = json::array();
    for (const auto& p : fixture.puzzles) {
        j["puzzles"].push_back({{"id", p.formula.id},
                                {"clauses", formula_clauses(p.formula)},
                                {"solution", p.solution.index()},
                                {"weight", p.weight},
                                {"control", p.control}});
    }
    return j.dump(2);
}

void write_fixture(std::ostream& out, const PuzzleFixture& fixture)
{
    out << fixture_to_json(fixture) << '\n';
}

PuzzleFixture read_fixture(std::istream& in)
{
    PuzzleFixture fx;
    try {
        const json j = json::parse(in);
        if (j.value("schema", "") != kPuzzleSchema) {
            throw ValidationError("puzzle fixture: expected schema " + std::string(kPuzzleSchema));
        }
        for (const json& p : j.at("puzzles")) {
            PuzzleEntry e;
            e.formula.id = p.at("id").get<int>();
            const json& clauses = p.at("clauses");
            if (!clauses.is_array() || clauses.size() != kNumClauses) {
                throw ValidationError("puzzle " + std::to_string(e.formula.id) + ": expected 6 clauses");
            }
            for (int k = 0; k < kNumClauses; ++k) {
                const json& c = clauses.at(k);
                if (!c.is_array() || c.size() != 2) throw ValidationError("clause must have two literals");
                e.formula.clauses[k] = Clause(parse_literal(c.at(0)), parse_literal(c.at(1)));
            }
            e.solution = Assignment(p.at("solution").get<int>());
            e.weight = p.value("weight", 1.0);
            e.control = p.value("control", false);
            fx.puzzles.push_back(e);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("puzzle fixture: ") + e.what());
    } catch (const DomainError& e) {
        throw ValidationError(std::string("puzzle fixture: ") + e.what());
    }
    fx.validate();
    return fx;
}

PuzzleFixture load_fixture(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open puzzle fixture " + path.string());
    return read_fixture(in);
}

} // namespace brt
