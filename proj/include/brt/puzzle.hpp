#pragma once

// 2-CNF puzzle stimuli: 6 clauses of 2 literals over 3 boolean variables.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace brt {

inline constexpr int kNumVariables = 3;
inline constexpr int kNumClauses = 6;
inline constexpr int kNumAssignments = 8;

struct Literal {
    int variable = 0;     // 0..2
    bool positive = true; // true: x, false: not x

    Literal() = default;
    // Throws DomainError on an out-of-range variable.
    Literal(int variable, bool positive);

    friend bool operator==(const Literal&, const Literal&) = default;
};

// Two literals over distinct variables.
struct Clause {
    Literal first;
    Literal second;

    Clause() : first(0, true), second(1, true) {}
    // Throws DomainError when both literals share a variable.
    Clause(Literal first, Literal second);

    friend bool operator==(const Clause&, const Clause&) = default;
};

// Truth assignment; bit i holds variable i.
class Assignment {
public:
    Assignment() = default;
    // Throws DomainError unless index is in 0..7.
    explicit Assignment(int index);
    static Assignment from_bits(bool a, bool b, bool c);
    // Parses "TFT"-style strings, variable 0 first.
    static Assignment parse(const std::string& text);

    int index() const noexcept { return index_; }
    bool value(int variable) const { return (index_ >> variable) & 1; }
    Assignment complement() const { return Assignment(index_ ^ 7); }
    std::string str() const;

    friend bool operator==(const Assignment&, const Assignment&) = default;
    friend auto operator<=>(const Assignment&, const Assignment&) = default;

private:
    int index_ = 0;
};

struct Formula {
    int id = 0;
    std::array<Clause, kNumClauses> clauses{};

    friend bool operator==(const Formula&, const Formula&) = default;
};

// Order in which the six clause patches are placed around the circle:
// slot k shows clause positions[k].
struct DisplayArrangement {
    std::array<int, kNumClauses> positions{};

    // Throws DomainError unless positions is a permutation of 0..5.
    void validate() const;
    friend bool operator==(const DisplayArrangement&, const DisplayArrangement&) = default;
};

bool clause_satisfied(const Clause& clause, Assignment a);
int count_satisfied(const Formula& formula, Assignment a);
// Satisfying assignments in index order, found by testing all eight.
std::vector<Assignment> enumerate_solutions(const Formula& formula);

// The 12 proper clauses: 3 variable pairs x 4 polarity combinations.
std::vector<Clause> clause_family();

// Same formula with every literal negated; the solution set is complemented.
Formula polarity_inversion(const Formula& formula);

// Rejection sampling over the clause family until the formula has exactly one
// solution (equal to `target` when given). Deterministic per seed.
Formula generate_puzzle(std::uint64_t seed, std::optional<Assignment> target = std::nullopt);

// Uniform random permutation of the six patch positions, deterministic per seed.
DisplayArrangement arrangement_for_trial(std::uint64_t seed);

// One stimulus in a puzzle fixture.
struct PuzzleEntry {
    Formula formula;
    Assignment solution;
    double weight = 1.0; // relative presentation frequency among trained puzzles
    bool control = false;
};

struct PuzzleFixture {
    std::vector<PuzzleEntry> puzzles;

    const PuzzleEntry* find(int id) const;
    const PuzzleEntry& at(int id) const; // throws ConfigError if missing
    std::optional<int> control_id() const;
    std::vector<int> ids() const;
    // Re-checks every entry: unique solution, matching solution field,
    // distinct ids. Throws ValidationError.
    void validate() const;
};

inline constexpr const char* kPuzzleSchema = "brt.puzzles/1";

// `count` unique-solution puzzles; the last one is the control, the polarity
// inversion of the highest-weight trained puzzle. All solutions are distinct.
// count must be >= 2.
PuzzleFixture generate_stimulus_set(int count, std::uint64_t seed);

void write_fixture(std::ostream& out, const PuzzleFixture& fixture);
PuzzleFixture read_fixture(std::istream& in);
PuzzleFixture load_fixture(const std::filesystem::path& path);
std::string fixture_to_json(const PuzzleFixture& fixture);

} // namespace brt
