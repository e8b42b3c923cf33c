#pragma once

#include <stdexcept>
#include <string>

namespace mafl {

struct SingularMetric : std::runtime_error {
    explicit SingularMetric(const std::string& what) : std::runtime_error(what) {}
};

struct NotAdmissible : std::runtime_error {
    NotAdmissible(const std::string& what, std::size_t point, double eig)
        : std::runtime_error(what), point(point), min_eig(eig) {}
    std::size_t point;
    double min_eig;
};

struct StepRejected : std::runtime_error {
    explicit StepRejected(const std::string& what) : std::runtime_error(what) {}
};

struct NonFinite : std::runtime_error {
    explicit NonFinite(const std::string& what) : std::runtime_error(what) {}
};

struct Stalled : std::runtime_error {
    explicit Stalled(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergence : std::runtime_error {
    explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct InadmissibleConstruction : std::runtime_error {
    InadmissibleConstruction(const std::string& what, double margin)
        : std::runtime_error(what), margin(margin) {}
    double margin;
};

}  // namespace mafl
