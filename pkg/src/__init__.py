# Package marker for the densification planner
