#include <stdio.h>
#include "e2gc.h"

int main(void) {
    E2gcNetwork *base = NULL, *planned = NULL;
    if (e2gc_network_from_blueprint("resnext50_32x4d", 224, 1.0, &base) != E2GC_STATUS_OK) {
        fprintf(stderr, "%s\n", e2gc_last_error_message());
        return 1;
    }
    for (uint64_t g = 1; g <= 32; g *= 2) {
        E2gcCost cost;
        if (e2gc_network_plan(base, E2GC_STRATEGY_KIND_E2GC, g, &planned) != E2GC_STATUS_OK ||
            e2gc_network_cost(planned, &cost) != E2GC_STATUS_OK) {
            fprintf(stderr, "%s\n", e2gc_last_error_message());
            return 1;
        }
        printf("G=%-2llu params=%llu macs=%llu\n", (unsigned long long)g,
               (unsigned long long)cost.params, (unsigned long long)cost.mc);
        e2gc_network_free(planned);
    }
    e2gc_network_free(base);
    return 0;
}
