#pragma once

#include <stdexcept>
#include <string>

namespace israte {

/// Base of every error the library raises. The category maps onto CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category { validation = 2, numerical = 3, budget = 4 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    Category category_;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(Category::validation, what) {}
};

/// The constraint set is empty (e.g. delta > F(A)).
class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& what) : Error(Category::validation, what) {}
};

/// Root finding, quadrature or convexity failures.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

/// The proposal is not absolutely continuous w.r.t. the target on {f > 0}.
class InfiniteWeightError : public Error {
public:
    explicit InfiniteWeightError(const std::string& what) : Error(Category::numerical, what) {}
};

/// The tilted moment generating function does not exist (integrability condition fails).
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(Category::numerical, what) {}
};

/// Enumeration or lattice size exceeds the configured budget.
class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& what) : Error(Category::budget, what) {}
};

}  // namespace israte
