#include "critscore/quadrature.hpp"

namespace critscore {

const GaussLegendre& gl64() {
    static const GaussLegendre rule(64);
    return rule;
}

const GaussLegendre& gl32() {
    static const GaussLegendre rule(32);
    return rule;
}

}  // namespace critscore
