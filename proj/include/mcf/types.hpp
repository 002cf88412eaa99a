#pragma once

#include <stdexcept>
#include <string>

namespace mcf {

enum class LossKind { Quadratic, Exponential, Logistic };
enum class Surrogate { None, QuadraticApprox, Jensen, Variational };

inline const char* loss_kind_name(LossKind loss) {
    switch (loss) {
        case LossKind::Quadratic: return "quadratic";
        case LossKind::Exponential: return "exponential";
        case LossKind::Logistic: return "logistic";
    }
    return "?";
}

inline LossKind loss_kind_from_name(const std::string& name) {
    for (LossKind loss : {LossKind::Quadratic, LossKind::Exponential, LossKind::Logistic})
        if (name == loss_kind_name(loss)) return loss;
    throw std::invalid_argument("unknown loss: " + name);
}

inline const char* surrogate_name(Surrogate surrogate) {
    switch (surrogate) {
        case Surrogate::None: return "none";
        case Surrogate::QuadraticApprox: return "quadratic_approx";
        case Surrogate::Jensen: return "jensen";
        case Surrogate::Variational: return "variational";
    }
    return "?";
}

inline Surrogate surrogate_from_name(const std::string& name) {
    for (Surrogate s : {Surrogate::None, Surrogate::QuadraticApprox, Surrogate::Jensen, Surrogate::Variational})
        if (name == surrogate_name(s)) return s;
    throw std::invalid_argument("unknown surrogate: " + name);
}

}  // namespace mcf
